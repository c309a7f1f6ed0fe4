import os
import shutil
import tempfile
import unittest

import numpy as np

from gradgate import tensor as T
from gradgate.architecture import ArchSpec, LayerSpec
from gradgate.classifier import buildClassifier, trainClassifier, TrainConfig, saveCheckpoint, loadCheckpoint, \
    forwardWithActivations, normalizationStats
from gradgate.container import writeContainer, CHECKPOINT_MAGIC
from gradgate.data import Dataset, genGlyphs
from gradgate.errors import ArchitectureError, ShapeError, ParamMismatchError, BadMagicError, ConfigError, \
    TrainingError
from gradgate.losses import softmaxCrossEntropy


## Two well separated classes of flat images.
def separableDataset(count, seed):
    rng = np.random.default_rng(seed)
    labels = np.arange(count) % 2
    images = np.where(labels[:, None, None, None] == 1, 0.8, 0.2) + rng.normal(0.0, 0.02, size=(count, 1, 4, 4))
    return Dataset(np.clip(images, 0.0, 1.0), labels, 'toy')


## Test the classifier construction, training and checkpoints.
class TestClassifier(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    ## The small CNN has two parameter sets per layer
    def testParamSets(self):
        model = buildClassifier(ArchSpec.smallCnn(), 0)
        self.assertEqual(len(model.params), 8)
        self.assertEqual([p.ordinal for p in model.params], list(range(8)))
        self.assertEqual(model.params[0].name, 'layer0.weight')
        self.assertEqual(model.params[0].tensor.shape, (8, 1, 3, 3))
        self.assertEqual(model.params[4].tensor.shape, (16 * 4 * 4, 64))
        self.assertEqual(model.params[7].tensor.shape, (10,))
        self.assertEqual(ArchSpec.smallCnn().outputShapes(), [(8, 8, 8), (16, 4, 4), (64,), (10,)])

    def testDeterministicBuild(self):
        a = buildClassifier(ArchSpec.smallCnn(), 3)
        b = buildClassifier(ArchSpec.smallCnn(), 3)
        c = buildClassifier(ArchSpec.smallCnn(), 4)
        for p, q, r in zip(a.params, b.params, c.params):
            self.assertTrue(np.array_equal(p.tensor, q.tensor))
            self.assertFalse(np.array_equal(p.tensor, r.tensor))

    def testInvalidArchitectures(self):
        self.assertRaises(ArchitectureError, ArchSpec([], (1, 16, 16), 10).outputShapes)
        final = ArchSpec([LayerSpec('dense', 5, activation='none')], (1, 16, 16), 10)
        with self.assertRaises(ArchitectureError) as context:
            final.outputShapes()
        self.assertEqual(context.exception.layerIndex, 0)
        tooLarge = ArchSpec([LayerSpec('conv', 4, kernel=20), LayerSpec('dense', 10, activation='none')],
                            (1, 16, 16), 10)
        self.assertRaises(ArchitectureError, tooLarge.outputShapes)
        convAfterDense = ArchSpec([LayerSpec('dense', 4), LayerSpec('conv', 4), LayerSpec('dense', 10)],
                                  (1, 16, 16), 10)
        with self.assertRaises(ArchitectureError) as context:
            convAfterDense.outputShapes()
        self.assertEqual(context.exception.layerIndex, 1)

    def testDescribe(self):
        arch = ArchSpec.smallCnn()
        self.assertEqual(ArchSpec.parse(arch.describe(), arch.inputShape, arch.classes), arch)
        self.assertEqual(arch.layers[0].describe(), 'conv:8:k3:p1:s1:relu:pool2')

    ## Forward pass returns one activation per layer and the logits
    def testForward(self):
        model = buildClassifier(ArchSpec.smallCnn(), 0)
        images = genGlyphs(5, 0).images
        logits, activations = forwardWithActivations(model, images)
        self.assertEqual(logits.shape, (5, 10))
        self.assertEqual([a.shape for a in activations], [(5, 8, 8, 8), (5, 16, 4, 4), (5, 64), (5, 10)])
        self.assertTrue(np.array_equal(activations[-1], logits))
        self.assertRaises(ShapeError, model.logits, np.zeros((2, 1, 8, 8)))

    ## An untrained network is close to uniform: the loss is about ln N
    def testInitialLoss(self):
        model = buildClassifier(ArchSpec.smallCnn(), 0)
        data = genGlyphs(50, 1)
        with T.GradientTape() as tape:
            logits, _ = model.graph(tape, data.images)
            loss = softmaxCrossEntropy(logits, data.labels)
        self.assertLess(abs(float(loss.value) - np.log(10.0)), 0.5)

    def testZeroEpochs(self):
        model = buildClassifier(ArchSpec.mlp((1, 4, 4), 2, 8), 0)
        before = [p.tensor.copy() for p in model.params]
        model, history = trainClassifier(model, separableDataset(20, 0), None, TrainConfig(epochs=0))
        self.assertEqual(history, [])
        for p, tensor in zip(model.params, before):
            self.assertTrue(np.array_equal(p.tensor, tensor))

    def testTrainSeparable(self):
        train = separableDataset(64, 0)
        val = separableDataset(32, 1)
        model = buildClassifier(ArchSpec.mlp((1, 4, 4), 2, 8), 0)
        model, history = trainClassifier(model, train, val, TrainConfig(epochs=5, batchSize=16, seed=2))
        self.assertEqual(len(history), 5)
        self.assertLess(history[-1]['trainLoss'], history[0]['trainLoss'])
        self.assertEqual(model.accuracy(val.images, val.labels), 1.0)
        self.assertEqual(float(model.metadata['valAccuracy']), 1.0)

    def testTrainDeterministic(self):
        results = []
        for _ in range(2):
            model = buildClassifier(ArchSpec.mlp((1, 4, 4), 2, 8), 0)
            model, _ = trainClassifier(model, separableDataset(32, 0), None, TrainConfig(epochs=2, seed=5))
            results.append(np.concatenate([p.tensor.ravel() for p in model.params]))
        self.assertTrue(np.array_equal(results[0], results[1]))

    def testTrainErrors(self):
        self.assertRaises(ConfigError, TrainConfig, batchSize=0)
        model = buildClassifier(ArchSpec.mlp((1, 4, 4), 2, 8), 0)
        data = separableDataset(8, 0)
        data.labels[0] = 5
        self.assertRaises(TrainingError, trainClassifier, model, data, None, TrainConfig(epochs=1))

    def testNormalizationStats(self):
        images = np.zeros((4, 2, 3, 3))
        images[:, 1] = np.arange(4.0)[:, None, None]
        mean, std = normalizationStats(images)
        self.assertTrue(np.array_equal(mean, [0.0, 1.5]))
        self.assertEqual(std[0], 1.0)
        self.assertAlmostEqual(std[1], np.sqrt(1.25), 12)

    ## A loaded checkpoint computes bitwise identical logits
    def testCheckpoint(self):
        model = buildClassifier(ArchSpec.smallCnn(), 7)
        model.normMean, model.normStd = normalizationStats(genGlyphs(20, 0).images)
        path = os.path.join(self.directory, 'model.ggate')
        saveCheckpoint(model, path)
        loaded = loadCheckpoint(path)
        self.assertEqual(loaded.arch, model.arch)
        self.assertEqual(loaded.metadata['seed'], '7')
        images = genGlyphs(6, 1).images
        self.assertTrue(np.array_equal(loaded.logits(images), model.logits(images)))

    def testCheckpointErrors(self):
        model = buildClassifier(ArchSpec.smallCnn(), 0)
        path = os.path.join(self.directory, 'model.ggate')
        saveCheckpoint(model, path)

        # Swap two parameter sets
        metadata = {'arch': model.arch.describe(), 'inputShape': '1,16,16', 'classes': '10', 'normMean': '0',
                    'normStd': '1'}
        records = [(p.name, p.tensor) for p in model.params]
        records[0], records[1] = records[1], records[0]
        swapped = os.path.join(self.directory, 'swapped.ggate')
        writeContainer(swapped, CHECKPOINT_MAGIC, metadata, records)
        self.assertRaises(ParamMismatchError, loadCheckpoint, swapped)

        missing = os.path.join(self.directory, 'missing.ggate')
        writeContainer(missing, CHECKPOINT_MAGIC, metadata, records[:-1])
        self.assertRaises(ParamMismatchError, loadCheckpoint, missing)

        dataset = os.path.join(self.directory, 'data.gdata')
        writeContainer(dataset, b'GDATA', {}, [])
        self.assertRaises(BadMagicError, loadCheckpoint, dataset)


if __name__ == '__main__':
    unittest.main()
