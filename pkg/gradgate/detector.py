##@package detector
# Binary anomaly detector trained on feature vectors, and the maximum softmax probability baseline.

import logging

import numpy as np
from scipy import special
from sklearn.preprocessing import StandardScaler

from . import tensor as T
from .data import stratifiedPartition
from .errors import DetectorError
from .losses import bceWithLogits
from .metrics import ScoredSample, rocArea

logger = logging.getLogger(__name__)

DETECTION_FRACTIONS = (0.4, 0.4, 0.2)
# Scores stay strictly inside (0,1).
SCORE_FLOOR = np.finfo(np.float64).tiny
SCORE_CEILING = np.nextafter(1.0, 0.0)


## Feature matrix with binary anomaly labels and provenance.
class LabeledFeatures:
    def __init__(self, matrix, labels, sampleIds, sourceTags):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.sampleIds = list(sampleIds)
        self.sourceTags = list(sourceTags)

    def __len__(self):
        return len(self.labels)

    def dimension(self):
        return self.matrix.shape[1]

    def subset(self, indices):
        return LabeledFeatures(self.matrix[indices], self.labels[indices], [self.sampleIds[i] for i in indices],
                               [self.sourceTags[i] for i in indices])

    ## Concatenate two sets.
    def merge(self, other):
        return LabeledFeatures(np.concatenate([self.matrix, other.matrix]), np.concatenate([self.labels, other.labels]),
                               self.sampleIds + other.sampleIds, self.sourceTags + other.sourceTags)

    ## Build from features, attaching the same anomaly label to all of them.
    @staticmethod
    def fromFeatures(features, label):
        return LabeledFeatures(np.stack([f.values for f in features]), np.full(len(features), label),
                               [f.sampleId for f in features], [f.sourceTag for f in features])


## Label and split normal and anomalous features into train, validation and test sets.
# Each side is split 40/40/20 on its own, then the sides are merged per part.
# @param normal List of normal features (label 0).
# @param anomalous List of anomalous features (label 1).
# @param seed Seed of the split.
# @param fractions Fractions of the parts.
# @return Tuple (train, validation, test) of LabeledFeatures.
def assembleDetectionSets(normal, anomalous, seed, fractions=DETECTION_FRACTIONS):
    if len(normal) == 0 or len(anomalous) == 0:
        raise DetectorError('Detection sets need normal and anomalous samples, got %s and %s.'
                            % (len(normal), len(anomalous)))
    sides = []
    for side, (features, label) in enumerate(((normal, 0), (anomalous, 1))):
        labeled = LabeledFeatures.fromFeatures(features, label)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), side]))
        sides.append([labeled.subset(part) for part in stratifiedPartition(np.zeros(len(labeled)), fractions, rng)])
    if sides[0][0].dimension() != sides[1][0].dimension():
        raise DetectorError('Normal features have %s entries, anomalous ones %s.'
                            % (sides[0][0].dimension(), sides[1][0].dimension()))
    return tuple(n.merge(a) for n, a in zip(*sides))


## Two-layer perceptron with a sigmoid output, fed with standardized features.
class DetectorMLP:
    ## Constructor.
    # @param inputDim Number of features P.
    # @param hidden Number of hidden units H.
    # @param seed Seed of the initialization.
    def __init__(self, inputDim, hidden=64, seed=0):
        rng = np.random.default_rng(seed)
        self.inputDim = inputDim
        self.hidden = hidden
        self.params = {}
        for name, shape, fanIn in (('hidden.weight', (inputDim, hidden), inputDim), ('hidden.bias', (hidden,), inputDim),
                                   ('output.weight', (hidden, 1), hidden), ('output.bias', (1,), hidden)):
            bound = 1.0 / np.sqrt(fanIn)
            self.params[name] = rng.uniform(-bound, bound, size=shape)
        self.scaler = None
        self.bestValAuroc = None

    ## Fit the standardization statistics; constant features keep a unit scale.
    def fitStandardization(self, matrix):
        self.scaler = StandardScaler().fit(matrix)

    def standardize(self, matrix):
        return matrix if self.scaler is None else self.scaler.transform(matrix)

    ## Record the forward pass of standardized features, returning the (count,) logits.
    def graph(self, tape, standardized, trainable=False):
        record = tape.variable if trainable else tape.constant
        params = {name: record(value, name=name) for name, value in self.params.items()}
        h = T.relu(T.add(T.matmul(tape.lift(standardized), params['hidden.weight']), params['hidden.bias']))
        out = T.add(T.matmul(h, params['output.weight']), params['output.bias'])
        return T.reshape(out, (standardized.shape[0],))

    ## Anomaly probabilities of raw feature vectors.
    def probabilities(self, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[1] != self.inputDim:
            raise DetectorError('Detector expects %s features, got shape %s.' % (self.inputDim, matrix.shape))
        with T.GradientTape() as tape:
            logits = self.graph(tape, self.standardize(matrix))
        return np.clip(special.expit(logits.value), SCORE_FLOOR, SCORE_CEILING)

    ## @var params
    # Dictionary name/tensor.
    ## @var scaler
    # StandardScaler fitted on the training split, None before training.
    ## @var bestValAuroc
    # Validation AUROC of the retained parameters.


## Train the detector with early stopping on the validation AUROC.
# @param train LabeledFeatures of the train split.
# @param val LabeledFeatures of the validation split.
# @param hidden Number of hidden units.
# @param seed Seed of initialization and shuffling.
# @param epochs Maximum number of epochs.
# @param patience Number of epochs without improvement before stopping.
# @param learningRate Learning rate of SGD.
# @param momentum Momentum of SGD.
# @param batchSize Minibatch size.
# @return DetectorMLP.
def trainDetector(train, val, hidden=64, seed=0, epochs=200, patience=10, learningRate=0.01, momentum=0.9,
                  batchSize=32):
    if train.dimension() != val.dimension():
        raise DetectorError('Train features have %s entries, validation features %s.'
                            % (train.dimension(), val.dimension()))
    detector = DetectorMLP(train.dimension(), hidden, seed)
    detector.fitStandardization(train.matrix)
    standardized = detector.standardize(train.matrix)
    targets = train.labels.astype(np.float64)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 1]))
    velocities = {name: np.zeros_like(value) for name, value in detector.params.items()}

    best = None
    stale = 0
    for epoch in range(epochs):
        order = rng.permutation(len(train))
        for batch, start in enumerate(range(0, len(train), batchSize)):
            indices = order[start:start + batchSize]
            with T.GradientTape() as tape:
                logits = detector.graph(tape, standardized[indices], trainable=True)
                loss = bceWithLogits(logits, targets[indices])
            if not np.isfinite(loss.value):
                raise DetectorError('Non-finite detector loss at epoch %s, batch %s.' % (epoch, batch))
            gradients = T.backward(tape, loss)
            for name in detector.params:
                velocities[name] = momentum * velocities[name] + gradients[name]
                detector.params[name] = detector.params[name] - learningRate * velocities[name]

        valAuroc = rocArea(val.labels, detector.probabilities(val.matrix))
        logger.debug('Detector epoch %s: validation AUROC %.4f', epoch, valAuroc)
        if best is None or valAuroc > best[0]:
            best = (valAuroc, {name: value.copy() for name, value in detector.params.items()})
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                logger.info('Detector early stop at epoch %s.', epoch)
                break

    if best is not None:
        detector.bestValAuroc, detector.params = best
    return detector


## Score features with a trained detector.
# @param detector DetectorMLP.
# @param features LabeledFeatures.
# @return List of ScoredSample.
def score(detector, features):
    probabilities = detector.probabilities(features.matrix)
    return [ScoredSample(sampleId, label, p, tag)
            for sampleId, label, p, tag in zip(features.sampleIds, features.labels, probabilities, features.sourceTags)]


## Maximum softmax probability baseline: score = 1 - max softmax probability.
# @param model Classifier.
# @param batch Images.
# @param anomalyLabel Anomaly label of the images.
# @param sourceTag Source of the images.
# @param sampleIds Identifiers, defaulting to positions.
# @return List of ScoredSample.
def mspScores(model, batch, anomalyLabel=0, sourceTag='', sampleIds=None):
    scores = mspFromLogits(model.logits(batch))
    if sampleIds is None:
        sampleIds = range(len(batch))
    return [ScoredSample(sampleId, anomalyLabel, s, sourceTag) for sampleId, s in zip(sampleIds, scores)]


## 1 - max softmax probability of each row of logits.
def mspFromLogits(logits):
    return 1.0 - special.softmax(np.asarray(logits, dtype=np.float64), axis=1).max(axis=1)
