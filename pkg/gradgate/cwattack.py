##@package cwattack
# Carlini-Wagner L2 attack with a fixed trade-off constant.

import numpy as np

from . import tensor as T
from .attack import Attack, AttackConfig, AttackResult
from .losses import oneHot

CONFIDENCE = 0.0
TANH_MARGIN = 1e-6


## Carlini-Wagner L2 attack optimized in tanh-space.
# x' = (tanh(w) + 1) / 2 minimizes ||x' - x||^2 + c max(Z_y - max_{i != y} Z_i, -kappa) by plain gradient
# descent on w, with kappa = 0 and no search over c. The lowest-L2 successful iterate of each sample is kept;
# unsuccessful samples return their last iterate.
class CarliniWagnerAttack(Attack):
    normBounded = False

    def _attackBatch(self, model, images, labels, indices):
        constant = self.config.cwConstant
        learningRate = self.config.cwLearningRate
        classes = model.arch.classes
        trueMask = oneHot(labels, classes)

        w = np.arctanh(2.0 * np.clip(images, TANH_MARGIN, 1.0 - TANH_MARGIN) - 1.0)

        # Misclassified samples already satisfy the hinge at zero perturbation.
        success = model.predict(images) != labels
        best = images.copy()
        bestL2 = np.where(success, 0.0, np.inf)
        last = images

        for iteration in range(self.config.cwIterations + 1):
            with T.GradientTape() as tape:
                wNode = tape.variable(w)
                adversarial = T.multiply(T.add(T.tanh(wNode), 1.0), 0.5)
                logits, _ = model.graph(tape, adversarial)

                masked = np.where(trueMask > 0, -np.inf, logits.value)
                otherMask = oneHot(np.argmax(masked, axis=1), classes)
                real = T.reduceSum(T.multiply(logits, trueMask), axis=1)
                other = T.reduceSum(T.multiply(logits, otherMask), axis=1)
                hinge = T.subtract(T.relu(T.add(T.subtract(real, other), CONFIDENCE)), CONFIDENCE)

                difference = T.subtract(adversarial, images)
                distance = T.reduceSum(T.multiply(difference, difference), axis=(1, 2, 3))
                loss = T.reduceSum(T.add(distance, T.multiply(hinge, constant)))

            last = adversarial.value
            l2 = np.sqrt(distance.value)
            improved = (np.argmax(logits.value, axis=1) != labels) & (l2 < bestL2)
            best[improved] = last[improved]
            bestL2[improved] = l2[improved]
            success |= improved

            if iteration < self.config.cwIterations:
                w = w - learningRate * T.gradWrtInput(tape, loss, wNode)

        adversarialImages = np.where(success[:, None, None, None], best, last)
        return AttackResult.measure(images, adversarialImages, success)


## Carlini-Wagner L2 attack of images with true labels y.
def cwL2(model, x, y, c, iterations, learningRate=0.05):
    config = AttackConfig('cw', cwConstant=c, cwIterations=iterations, cwLearningRate=learningRate)
    return CarliniWagnerAttack(config).generate(model, x, y)
