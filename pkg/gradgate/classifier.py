##@package classifier
# Small image classifiers whose gradients feed the detectors.

import logging

import numpy as np

from . import tensor as T
from .architecture import ArchSpec
from .container import writeContainer, readContainer, formatFloats, parseFloats, CHECKPOINT_MAGIC
from .errors import ShapeError, TrainingError, ParamMismatchError, CorruptHeaderError, ConfigError
from .losses import softmaxCrossEntropy

logger = logging.getLogger(__name__)


## Named trainable tensor: one weight or one bias of one layer.
class ParamSet:
    def __init__(self, name, tensor, ordinal):
        self.name = name
        self.tensor = tensor
        self.ordinal = ordinal

    def __repr__(self):
        return 'ParamSet(%s, %s, shape=%s)' % (self.ordinal, self.name, self.tensor.shape)


## Hyper-parameters of classifier training.
class TrainConfig:
    def __init__(self, epochs=10, batchSize=32, learningRate=0.05, momentum=0.9, weightDecay=5e-4, seed=0):
        if epochs < 0 or batchSize < 1 or learningRate <= 0 or not 0 <= momentum < 1 or weightDecay < 0:
            raise ConfigError('Invalid training configuration: epochs=%s, batch size=%s, learning rate=%s, '
                              'momentum=%s, weight decay=%s.' % (epochs, batchSize, learningRate, momentum,
                                                                 weightDecay))
        self.epochs = epochs
        self.batchSize = batchSize
        self.learningRate = learningRate
        self.momentum = momentum
        self.weightDecay = weightDecay
        self.seed = seed


## Sequence of layer blocks with their parameters and the frozen input normalization.
class Classifier:
    ## Constructor.
    # @param arch ArchSpec.
    # @param params List of ParamSet in ordinal order.
    # @param normMean Per-channel mean of the training data.
    # @param normStd Per-channel standard deviation of the training data.
    # @param metadata Dictionary of string metadata (seed, validation accuracy, ...).
    def __init__(self, arch, params, normMean=None, normStd=None, metadata=None):
        self.arch = arch
        self.params = list(params)
        channels = self.channels()
        self.normMean = np.zeros(channels) if normMean is None else np.asarray(normMean, dtype=np.float64)
        self.normStd = np.ones(channels) if normStd is None else np.asarray(normStd, dtype=np.float64)
        self.metadata = dict(metadata) if metadata is not None else {}

    def channels(self):
        return self.arch.inputShape[0] if len(self.arch.inputShape) == 3 else 1

    def paramNames(self):
        return [p.name for p in self.params]

    def parameter(self, name):
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    ## Record the forward pass on a tape.
    # @param tape Active GradientTape.
    # @param inputs Node or tensor of shape (batch,) + input shape, pixels in raw [0,1] space.
    # @param trainable True to record parameters as variables (named after their ParamSet).
    # @return Tuple (logits node, list of activation nodes, one per layer).
    def graph(self, tape, inputs, trainable=False):
        x = tape.lift(inputs)
        if x.value.shape[1:] != self.arch.inputShape:
            raise ShapeError('Classifier: batch shape %s does not match input shape %s'
                             % (x.value.shape, self.arch.inputShape))
        record = tape.variable if trainable else tape.constant
        params = [record(p.tensor, name=p.name) for p in self.params]

        if len(self.arch.inputShape) == 3:
            h = T.multiply(T.subtract(x, self.normMean), 1.0 / self.normStd)
        else:
            h = T.multiply(T.subtract(x, self.normMean[0]), 1.0 / self.normStd[0])

        activations = []
        for i, layer in enumerate(self.arch.layers):
            weight, bias = params[2 * i], params[2 * i + 1]
            if layer.kind == 'conv':
                h = T.add(T.conv2d(h, weight, stride=layer.stride, padding=layer.padding), bias)
            else:
                if h.value.ndim > 2:
                    h = T.reshape(h, (h.value.shape[0], -1))
                h = T.add(T.matmul(h, weight), bias)
            if layer.activation == 'relu':
                h = T.relu(h)
            if layer.pool > 1:
                h = T.maxpool2d(h, layer.pool)
            activations.append(h)
        return h, activations

    ## Compute logits without recording gradients.
    # @param images Tensor of shape (count,) + input shape.
    # @param batchSize Number of images per forward pass.
    # @return (count, N) logits.
    def logits(self, images, batchSize=256):
        outputs = []
        for start in range(0, len(images), batchSize):
            with T.GradientTape() as tape:
                logits, _ = self.graph(tape, images[start:start + batchSize])
            outputs.append(logits.value)
        return np.concatenate(outputs) if outputs else np.zeros((0, self.arch.classes))

    def predict(self, images, batchSize=256):
        return np.argmax(self.logits(images, batchSize), axis=1)

    def accuracy(self, images, labels):
        return float(np.mean(self.predict(images) == np.asarray(labels)))

    ## @var arch
    # ArchSpec of the network.
    ## @var params
    # ParamSets in canonical ordinal order.
    ## @var metadata
    # Dictionary of string metadata stored in checkpoints.


## Create a classifier with fan-in scaled uniform initialization.
# @param arch ArchSpec.
# @param seed Seed of the generator.
# @return Classifier.
def buildClassifier(arch, seed):
    shapes = arch.paramShapes()
    rng = np.random.default_rng(seed)
    params = []
    for ordinal, (name, shape, fanIn) in enumerate(shapes):
        bound = 1.0 / np.sqrt(fanIn)
        params.append(ParamSet(name, rng.uniform(-bound, bound, size=shape), ordinal))
    return Classifier(arch, params, metadata={'seed': str(seed)})


## Forward pass returning logits and the per-layer activations.
# @param model Classifier.
# @param batch Tensor of shape (batch,) + input shape.
# @return Tuple (logits, list of activation tensors).
def forwardWithActivations(model, batch):
    with T.GradientTape() as tape:
        logits, activations = model.graph(tape, batch)
    return logits.value, [a.value for a in activations]


## Per-channel mean and standard deviation of a set of images.
def normalizationStats(images):
    if images.ndim == 4:
        axes = (0, 2, 3)
    else:
        axes = None
    mean = np.atleast_1d(images.mean(axis=axes))
    std = np.atleast_1d(images.std(axis=axes))
    return mean, np.where(std > 1e-8, std, 1.0)


## Train with minibatch SGD and momentum on softmax cross-entropy.
# The normalization statistics are computed on the training set and frozen into the model.
# @param model Classifier, updated in place.
# @param trainSet Dataset.
# @param valSet Dataset or None.
# @param config TrainConfig.
# @return Tuple (model, history) with history a list of dictionaries, one per epoch.
def trainClassifier(model, trainSet, valSet, config):
    history = []
    if config.epochs == 0:
        return model, history
    labels = np.asarray(trainSet.labels)
    if np.any(labels < 0) or np.any(labels >= model.arch.classes):
        raise TrainingError(0, 0, 'labels outside [0, %s)' % model.arch.classes)

    model.normMean, model.normStd = normalizationStats(trainSet.images)
    rng = np.random.default_rng(config.seed)
    velocities = [np.zeros_like(p.tensor) for p in model.params]
    count = len(labels)

    for epoch in range(config.epochs):
        order = rng.permutation(count)
        totalLoss = 0.0
        correct = 0
        for batch, start in enumerate(range(0, count, config.batchSize)):
            indices = order[start:start + config.batchSize]
            with T.GradientTape() as tape:
                logits, _ = model.graph(tape, trainSet.images[indices], trainable=True)
                loss = softmaxCrossEntropy(logits, labels[indices])
            lossValue = float(loss.value)
            if not np.isfinite(lossValue):
                raise TrainingError(epoch, batch, 'non-finite loss %s' % lossValue)
            gradients = T.backward(tape, loss)

            for p, velocity in zip(model.params, velocities):
                velocity *= config.momentum
                velocity += gradients[p.name] + config.weightDecay * p.tensor
                p.tensor = p.tensor - config.learningRate * velocity

            totalLoss += lossValue * len(indices)
            correct += int(np.sum(np.argmax(logits.value, axis=1) == labels[indices]))
            logger.debug('Epoch %s, batch %s: loss %.4f', epoch, batch, lossValue)

        entry = {'epoch': epoch, 'trainLoss': totalLoss / count, 'trainAccuracy': correct / count}
        if valSet is not None and len(valSet) > 0:
            entry['valAccuracy'] = model.accuracy(valSet.images, valSet.labels)
            model.metadata['valAccuracy'] = '%.17g' % entry['valAccuracy']
        history.append(entry)
        logger.info('Epoch %s: loss %.4f, train accuracy %.4f%s', epoch, entry['trainLoss'], entry['trainAccuracy'],
                    ', validation accuracy %.4f' % entry['valAccuracy'] if 'valAccuracy' in entry else '')
    return model, history


## Save a classifier.
# @param model Classifier.
# @param path Output path.
def saveCheckpoint(model, path):
    metadata = dict(model.metadata)
    metadata.update({'arch': model.arch.describe(),
                     'inputShape': ','.join(str(d) for d in model.arch.inputShape),
                     'classes': str(model.arch.classes),
                     'normMean': formatFloats(model.normMean),
                     'normStd': formatFloats(model.normStd)})
    writeContainer(path, CHECKPOINT_MAGIC, metadata, [(p.name, p.tensor) for p in model.params])


## Load a classifier saved by saveCheckpoint.
# @param path Checkpoint path.
# @return Classifier.
def loadCheckpoint(path):
    metadata, records = readContainer(path, CHECKPOINT_MAGIC)
    try:
        inputShape = tuple(int(d) for d in metadata.pop('inputShape').split(','))
        classes = int(metadata.pop('classes'))
        arch = ArchSpec.parse(metadata.pop('arch'), inputShape, classes)
        normMean = parseFloats(metadata.pop('normMean'))
        normStd = parseFloats(metadata.pop('normStd'))
    except (KeyError, ValueError) as e:
        raise CorruptHeaderError('Invalid checkpoint metadata in "%s": %s' % (path, e))

    expected = arch.paramShapes()
    if len(expected) != len(records):
        raise ParamMismatchError('Checkpoint "%s" holds %s parameter sets, the architecture needs %s.'
                                 % (path, len(records), len(expected)))
    params = []
    for ordinal, ((name, shape, _), (storedName, tensor)) in enumerate(zip(expected, records)):
        if name != storedName or tuple(shape) != tensor.shape:
            raise ParamMismatchError('Parameter set %s of "%s" is %s %s, expected %s %s.'
                                     % (ordinal, path, storedName, tensor.shape, name, tuple(shape)))
        params.append(ParamSet(name, tensor, ordinal))
    return Classifier(arch, params, normMean, normStd, metadata)
