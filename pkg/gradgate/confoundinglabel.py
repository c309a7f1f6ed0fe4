##@package confoundinglabel
# Confounding labels: targets never seen in training, used to elicit gradients without ground truth.

import numpy as np

from .errors import LabelError

LABEL_KINDS = ('all-ones', 'all-zeros', 'k-hot')


## Binary target vector which is not a one-hot label.
class ConfoundingLabel:
    def __init__(self, vector, descriptor):
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1 or len(vector) < 2:
            raise LabelError('A confounding label needs at least 2 classes, got shape %s.' % (vector.shape,))
        if not np.all((vector == 0.0) | (vector == 1.0)):
            raise LabelError('Confounding label entries must be 0 or 1.')
        if int(vector.sum()) == 1:
            raise LabelError('A single-1 vector is a training label, not a confounding label.')
        self.vector = vector
        self.descriptor = descriptor

    def __len__(self):
        return len(self.vector)

    def __repr__(self):
        return 'ConfoundingLabel(%s)' % self.descriptor


## Build a confounding label.
# @param classes Number of classes N >= 2.
# @param kind "all-ones" (default), "all-zeros" or "k-hot".
# @param k Number of ones of a k-hot label, 2 <= k <= N.
# @param seed Seed choosing the positions of a k-hot label.
# @return ConfoundingLabel.
def makeConfoundingLabel(classes, kind='all-ones', k=None, seed=None):
    if classes < 2:
        raise LabelError('A confounding label needs at least 2 classes, got %s.' % classes)
    if kind == 'all-ones':
        return ConfoundingLabel(np.ones(classes), 'all-ones')
    if kind == 'all-zeros':
        return ConfoundingLabel(np.zeros(classes), 'all-zeros')
    if kind == 'k-hot':
        if k is None or k < 2 or k > classes:
            raise LabelError('k-hot labels need 2 <= k <= %s, got k=%s.' % (classes, k))
        vector = np.zeros(classes)
        vector[np.random.default_rng(seed).choice(classes, size=k, replace=False)] = 1.0
        return ConfoundingLabel(vector, 'k-hot(k=%s,seed=%s)' % (k, seed))
    raise LabelError('Unknown confounding label kind "%s" (expected one of %s).' % (kind, ', '.join(LABEL_KINDS)))
