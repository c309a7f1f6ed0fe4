##@package featureextractor
# Gradient-norm and activation-norm representations of inputs.
#
# The gradient representation of an input is the vector of squared L2 norms of the gradients of the binary
# cross-entropy between the logits and a confounding label, one entry per parameter set in ordinal order.

import logging
from abc import ABCMeta, abstractmethod
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import tensor as T
from .errors import GraphError, LabelError, DataError
from .losses import bceWithLogits
from .metrics import rocArea

logger = logging.getLogger(__name__)

UNLABELED = -1


## Feature vector of one input with its provenance.
class Feature:
    kind = None

    ## Constructor.
    # @param values Feature vector.
    # @param sampleId Index of the input in its dataset.
    # @param sourceTag Source of the input.
    # @param anomalyLabel 1 for anomalous, 0 for normal, -1 if unknown.
    # @param labelDescriptor Descriptor of the confounding label used, if any.
    def __init__(self, values, sampleId, sourceTag, anomalyLabel=UNLABELED, labelDescriptor=''):
        self.values = np.asarray(values, dtype=np.float64)
        self.sampleId = sampleId
        self.sourceTag = sourceTag
        self.anomalyLabel = anomalyLabel
        self.labelDescriptor = labelDescriptor

    def __len__(self):
        return len(self.values)


## Squared gradient norms, one entry per parameter set.
class GradFeature(Feature):
    kind = 'gradient'


## Activation L2 norms, one entry per layer.
class ActivFeature(Feature):
    kind = 'activation'


## Binary cross-entropy between logits and a confounding label, averaged over the N classes.
# Uses the sigmoid of each logit as predicted probability, in the stable softplus form.
# @param logits Node of shape (N,) or (1, N).
# @param label ConfoundingLabel.
# @return Scalar node.
def bceConfoundingLoss(logits, label):
    if logits.value.shape[-1] != len(label.vector):
        raise LabelError('Confounding label of %s classes for logits of shape %s.'
                         % (len(label.vector), logits.value.shape))
    return bceWithLogits(logits, np.broadcast_to(label.vector, logits.value.shape))


## Abstract per-sample feature extractor.
class FeatureExtractor(metaclass=ABCMeta):
    featureClass = Feature

    ## Constructor.
    # @param workers Number of threads extracting samples in parallel.
    def __init__(self, workers=1):
        self.workers = workers

    ## Extract the features of a batch, one sample at a time.
    # @param model Classifier, only read.
    # @param images Tensor (count,) + input shape.
    # @param sourceTag Source of the images.
    # @param anomalyLabel Anomaly label attached to every feature.
    # @param sampleIds Identifiers of the samples, defaulting to their positions.
    # @return List of features ordered as the images.
    def extract(self, model, images, sourceTag='', anomalyLabel=UNLABELED, sampleIds=None):
        if len(images) == 0:
            raise DataError('No images to extract features from (source "%s").' % sourceTag)
        if sampleIds is None:
            sampleIds = range(len(images))

        def run(item):
            sampleId, image = item
            values = self._sampleValues(model, image[None])
            if not np.all(np.isfinite(values)):
                raise GraphError('Non-finite %s feature for sample %s of "%s".' % (self.featureClass.kind,
                                                                                  sampleId, sourceTag))
            return self.featureClass(values, sampleId, sourceTag, anomalyLabel, self.labelDescriptor())

        items = list(zip(sampleIds, images))
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                features = list(executor.map(run, items))
        else:
            features = [run(item) for item in items]
        logger.info('Extracted %s %s features of "%s".', len(features), self.featureClass.kind, sourceTag)
        return features

    def labelDescriptor(self):
        return ''

    ## Feature vector of one sample.
    # @param model Classifier.
    # @param image Batch of one image.
    # @return Vector.
    @abstractmethod
    def _sampleValues(self, model, image):
        return None

    ## Number of entries of the feature vectors.
    @abstractmethod
    def columnCount(self, model):
        return None


## Squared L2 norms of the confounding-label loss gradients.
class GradientFeatureExtractor(FeatureExtractor):
    featureClass = GradFeature

    ## Constructor.
    # @param label ConfoundingLabel.
    # @param lossScale Factor applied to the loss before backpropagation (1 by default, -1 flips its sign).
    # @param workers Number of threads.
    def __init__(self, label, lossScale=1.0, workers=1):
        FeatureExtractor.__init__(self, workers)
        self.label = label
        self.lossScale = lossScale

    def _sampleValues(self, model, image):
        with T.GradientTape() as tape:
            logits, _ = model.graph(tape, image, trainable=True)
            loss = bceConfoundingLoss(logits, self.label)
            if self.lossScale != 1.0:
                loss = T.multiply(loss, self.lossScale)
        gradients = T.backward(tape, loss)
        return np.array([np.sum(gradients[p.name] * gradients[p.name]) for p in model.params])

    def columnCount(self, model):
        return len(model.params)

    def labelDescriptor(self):
        return self.label.descriptor


## L2 norms of the layer outputs.
class ActivationFeatureExtractor(FeatureExtractor):
    featureClass = ActivFeature

    def _sampleValues(self, model, image):
        with T.GradientTape() as tape:
            _, activations = model.graph(tape, image)
        return np.array([np.sqrt(np.sum(a.value * a.value)) for a in activations])

    def columnCount(self, model):
        return len(model.arch.layers)


## Gradient representations of a batch.
# @param model Classifier.
# @param batch Images.
# @param label ConfoundingLabel.
# @return List of GradFeature.
def extractGradientFeatures(model, batch, label, sourceTag='', anomalyLabel=UNLABELED, workers=1, lossScale=1.0):
    return GradientFeatureExtractor(label, lossScale, workers).extract(model, batch, sourceTag, anomalyLabel)


## Activation-norm representations of a batch.
def extractActivationFeatures(model, batch, sourceTag='', anomalyLabel=UNLABELED, workers=1):
    return ActivationFeatureExtractor(workers).extract(model, batch, sourceTag, anomalyLabel)


## Stack feature vectors in a (count, columns) matrix.
def featureMatrix(features):
    if len(features) == 0:
        raise DataError('No features.')
    return np.stack([f.values for f in features])


## Layer-wise gradient L2 norms from per-parameter-set squared norms.
# @param model Classifier.
# @param matrix (count, parameter sets) matrix of squared norms.
# @return (count, layers) matrix with sqrt(|grad W|^2 + |grad b|^2) per layer.
def layerwiseGradientNorms(model, matrix):
    matrix = np.asarray(matrix)
    layers = len(model.arch.layers)
    if matrix.shape[1] != 2 * layers:
        raise DataError('Expected %s gradient columns, got %s.' % (2 * layers, matrix.shape[1]))
    return np.sqrt(matrix[:, 0::2] + matrix[:, 1::2])


## Order statistics of each column per group.
# @param groups Dictionary tag/(count, columns) matrix.
# @return Dictionary tag/(columns, 5) array with min, first quartile, median, third quartile and max.
def normSummary(groups):
    summary = {}
    for tag, matrix in groups.items():
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or len(matrix) == 0:
            raise DataError('Group "%s" is empty.' % tag)
        summary[tag] = np.quantile(matrix, [0.0, 0.25, 0.5, 0.75, 1.0], axis=0).T
    return summary


## AUROC of every column taken alone, anomalous samples being positive.
# @param normal (count, columns) matrix of normal samples.
# @param anomalous (count, columns) matrix of anomalous samples.
# @return Vector of AUROC values.
def singleFeatureAurocs(normal, anomalous):
    labels = np.concatenate([np.zeros(len(normal)), np.ones(len(anomalous))])
    stacked = np.concatenate([normal, anomalous])
    return np.array([rocArea(labels, stacked[:, c]) for c in range(stacked.shape[1])])
