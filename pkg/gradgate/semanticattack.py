##@package semanticattack
# Semantic attack: negative images.

import numpy as np

from .attack import Attack, AttackConfig, AttackResult


## Pixel negation x' = 1 - x. Success means the prediction differs from the true label.
class SemanticAttack(Attack):
    normBounded = False

    def _attackBatch(self, model, images, labels, indices):
        adversarial = 1.0 - images
        return AttackResult.measure(images, adversarial, model.predict(adversarial) != labels)


## Negate images.
# @param x Images in [0,1].
# @param model Optional classifier; without it all success flags are False.
# @param y True labels, defaulting to the predictions of the model on x.
# @return AttackResult.
def semantic(x, model=None, y=None):
    if model is None:
        return AttackResult.measure(x, 1.0 - x, np.zeros(len(x), dtype=bool))
    if y is None:
        y = model.predict(x)
    return SemanticAttack(AttackConfig('semantic')).generate(model, x, y)
