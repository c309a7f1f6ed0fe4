##@package losses
# Differentiable losses built from tensor operations.

import numpy as np

from . import tensor as T
from .errors import ShapeError


## One-hot encoding.
# @param labels Integer class ids.
# @param classes Number of classes.
# @return (len(labels), classes) float tensor.
def oneHot(labels, classes):
    labels = np.asarray(labels, dtype=np.int64)
    result = np.zeros((len(labels), classes))
    result[np.arange(len(labels)), labels] = 1.0
    return result


## Softmax cross-entropy between logits and integer labels.
# @param logits (batch, N) node.
# @param labels Integer class ids.
# @param reduction "mean" or "sum" over the batch.
# @return Scalar node.
def softmaxCrossEntropy(logits, labels, reduction='mean'):
    if logits.value.ndim != 2 or logits.value.shape[0] != len(labels):
        raise ShapeError('softmaxCrossEntropy: logits %s for %s labels' % (logits.value.shape, len(labels)))
    picked = T.reduceSum(T.multiply(logits, oneHot(labels, logits.value.shape[1])), axis=1)
    perSample = T.subtract(T.logsumexp(logits, axis=1), picked)
    return T.reduceMean(perSample) if reduction == 'mean' else T.reduceSum(perSample)


## Binary cross-entropy on logits, -[y log sigmoid(z) + (1-y) log(1-sigmoid(z))], averaged over all entries.
# Computed as softplus(z) - y z, which never overflows.
# @param logits Node.
# @param targets Tensor of the shape of the logits with entries in [0,1].
# @return Scalar node.
def bceWithLogits(logits, targets):
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.value.shape:
        raise ShapeError('bceWithLogits: logits %s, targets %s' % (logits.value.shape, targets.shape))
    return T.reduceMean(T.subtract(T.softplus(logits), T.multiply(logits, targets)))
