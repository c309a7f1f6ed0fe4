##@package signattacks
# Gradient sign attacks: FGSM, BIM, PGD and the iterative least-likely class method.

import numpy as np

from .attack import Attack, AttackConfig, AttackResult, inputGradient, sampleGenerator


## Fast gradient sign method: x' = clip(x + epsilon sign(grad CE(f(x), y)), 0, 1).
class FgsmAttack(Attack):
    def _attackBatch(self, model, images, labels, indices):
        gradient = inputGradient(model, images, labels)
        adversarial = np.clip(images + self.config.epsilon * np.sign(gradient), 0.0, 1.0)
        return AttackResult.measure(images, adversarial, model.predict(adversarial) != labels)


## Basic iterative method: repeated sign steps projected on the epsilon-ball around x and on [0,1].
class BimAttack(Attack):
    def _start(self, images, indices):
        return images

    def _attackBatch(self, model, images, labels, indices):
        epsilon, alpha = self.config.epsilon, self.config.alpha
        low, high = images - epsilon, images + epsilon
        adversarial = self._start(images, indices)
        for _ in range(self.config.iterations):
            gradient = inputGradient(model, adversarial, labels)
            adversarial = np.clip(np.clip(adversarial + alpha * np.sign(gradient), low, high), 0.0, 1.0)
        return AttackResult.measure(images, adversarial, model.predict(adversarial) != labels)


## Projected gradient descent: BIM from a uniform random start in the epsilon-ball.
class PgdAttack(BimAttack):
    def _start(self, images, indices):
        return randomStart(images, self.config.epsilon, self.config.seed, indices)


## Iterative least-likely class method: sign descent of the cross-entropy toward argmin of the clean logits.
class IterLlAttack(Attack):
    def _attackBatch(self, model, images, labels, indices):
        epsilon, alpha = self.config.epsilon, self.config.alpha
        targets = np.argmin(model.logits(images), axis=1)
        low, high = images - epsilon, images + epsilon
        adversarial = images
        for _ in range(self.config.iterations):
            gradient = inputGradient(model, adversarial, targets)
            adversarial = np.clip(np.clip(adversarial - alpha * np.sign(gradient), low, high), 0.0, 1.0)
        return AttackResult.measure(images, adversarial, model.predict(adversarial) == targets, targets)


## Uniform random start in the epsilon-ball, clipped to [0,1].
# @param images Clean images.
# @param epsilon Budget.
# @param seed Base seed.
# @param indices Positions of the images in the attacked set, used to derive per-sample seeds.
# @return Tensor of the shape of the images.
def randomStart(images, epsilon, seed, indices):
    noise = np.stack([sampleGenerator(seed, index).uniform(-epsilon, epsilon, size=images.shape[1:])
                      for index in indices])
    return np.clip(images + noise, 0.0, 1.0)


def fgsm(model, x, y, epsilon):
    return FgsmAttack(AttackConfig('fgsm', epsilon=epsilon)).generate(model, x, y)


def bim(model, x, y, epsilon, alpha, iterations):
    return BimAttack(AttackConfig('bim', epsilon=epsilon, alpha=alpha, iterations=iterations)).generate(model, x, y)


def pgd(model, x, y, epsilon, alpha, iterations, seed):
    config = AttackConfig('pgd', epsilon=epsilon, alpha=alpha, iterations=iterations, seed=seed)
    return PgdAttack(config).generate(model, x, y)


## Iterative least-likely class attack; the true labels are not needed.
def iterll(model, x, epsilon, alpha, iterations):
    config = AttackConfig('iterll', epsilon=epsilon, alpha=alpha, iterations=iterations)
    return IterLlAttack(config).generate(model, x, np.zeros(len(x), dtype=np.int64))
