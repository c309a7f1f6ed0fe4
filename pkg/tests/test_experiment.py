import os
import shutil
import tempfile
import unittest

import numpy as np

from gradgate.__main__ import main
from gradgate.architecture import ArchSpec
from gradgate.classifier import buildClassifier, saveCheckpoint
from gradgate.config import ExperimentConfig
from gradgate.csv_interface import parseFeatures, parseScores
from gradgate.data import genGlyphs, loadDataset, saveDataset, OOD_LABEL
from gradgate.errors import DetectorError
from gradgate.experiment import Experiment
from gradgate.featureextractor import featureMatrix, UNLABELED

## Small experiment running in seconds.
TINY = '''
[data]
train_count = 60
test_count = 20
[classifier]
arch = mlp
hidden = 8
epochs = 1
[attacks]
kinds = fgsm,semantic
iterations = 2
[ood]
kinds = uniform-noise
[detector]
hidden = 8
epochs = 5
patience = 2
'''


## Test the experiment pipeline and the command-line interface.
class TestExperiment(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.mkdtemp()
        self.configPath = os.path.join(self.directory, 'tiny.ini')
        with open(self.configPath, 'w') as file:
            file.write(TINY)

    def tearDown(self):
        shutil.rmtree(self.directory)

    def _config(self, out, overrides=None):
        values = {('experiment', 'out'): os.path.join(self.directory, out)}
        values.update(overrides or {})
        return ExperimentConfig(self.configPath, values)

    def testRunExperiment(self):
        experiment = Experiment(self._config('run'))
        reports = experiment.runExperiment()
        self.assertEqual([(r.source, r.method) for r in reports],
                         [(source, method) for source in ('fgsm', 'semantic', 'uniform-noise')
                          for method in ('gradient', 'activation', 'msp')])
        for r in reports:
            for value in (r.accuracy, r.auroc, r.aupr):
                self.assertGreaterEqual(value, 0.0)
                self.assertLessEqual(value, 1.0)
        files = os.listdir(experiment.outputDirectory)
        self.assertIn(os.path.basename(experiment.checkpointPath()), files)
        self.assertTrue(any(f.startswith('report-') for f in files))
        self.assertFalse(any(f.endswith('.tmp') for f in files))

    ## Same master seed, identical reports
    def testDeterminism(self):
        first = Experiment(self._config('first')).runExperiment()
        second = Experiment(self._config('second')).runExperiment()
        self.assertEqual([r.toText() for r in first], [r.toText() for r in second])

    ## A second run reuses the artifacts of the first one
    def testResume(self):
        config = self._config('resume')
        first = Experiment(config).runExperiment()
        checkpoint = Experiment(config).checkpointPath()
        modified = os.path.getmtime(checkpoint)
        second = Experiment(config).runExperiment()
        self.assertEqual(os.path.getmtime(checkpoint), modified)
        self.assertEqual([r.toText() for r in first], [r.toText() for r in second])

    def testAnomalies(self):
        experiment = Experiment(self._config('anomalies', {('data', 'holdout_class'): 3}))
        paths = experiment.genAnomalies()
        self.assertEqual(list(paths), ['fgsm', 'semantic', 'uniform-noise', 'holdout'])
        clean = loadDataset(experiment.cleanPath())
        self.assertNotIn(3, clean.labels)
        fgsm = loadDataset(paths['fgsm'])
        self.assertLessEqual(np.abs(fgsm.images - clean.images).max(), 0.1 + 1e-12)
        self.assertTrue(np.all(loadDataset(paths['uniform-noise']).labels == OOD_LABEL))
        self.assertTrue(np.all(loadDataset(paths['holdout']).labels == OOD_LABEL))
        self.assertEqual(experiment.loadClassifier().arch.classes, 10)

    def testDetectEmpty(self):
        experiment = Experiment(self._config('empty'))
        experiment.genAnomalies()
        normal = experiment.extractFeatures(experiment.cleanPath())
        empty = os.path.join(self.directory, 'empty.csv')
        with open(empty, 'w') as file:
            file.write('sample_id,anomaly_label,source_tag,f0\n')
        self.assertRaises(DetectorError, experiment.detect, normal, empty)

    def testCompareNorms(self):
        experiment = Experiment(self._config('norms'))
        text = experiment.compareNorms()
        self.assertIn('[gradient layer0]', text)
        self.assertIn('[activation layer1]', text)
        self.assertIn('uniform-noise', text)

    ## Cached attacks and features follow the contents of the checkpoint
    def testCacheFollowsCheckpoint(self):
        experiment = Experiment(self._config('cache'))
        checkpoints = []
        for seed in (1, 2):
            path = os.path.join(self.directory, 'model-%s.ggate' % seed)
            saveCheckpoint(buildClassifier(ArchSpec.mlp(hidden=8), seed), path)
            checkpoints.append(path)
        dataPath = os.path.join(self.directory, 'glyphs.gdata')
        saveDataset(genGlyphs(10, 0), dataPath)

        first, second = [experiment.extractFeatures(dataPath, 'gradient', path) for path in checkpoints]
        self.assertNotEqual(first, second)
        self.assertFalse(np.array_equal(featureMatrix(parseFeatures(first)), featureMatrix(parseFeatures(second))))
        self.assertNotEqual(experiment.genAnomalies(checkpoints[0])['fgsm'],
                            experiment.genAnomalies(checkpoints[1])['fgsm'])

        # Same file name, new weights
        saveCheckpoint(buildClassifier(ArchSpec.mlp(hidden=8), 3), checkpoints[0])
        self.assertNotEqual(experiment.extractFeatures(dataPath, 'gradient', checkpoints[0]), first)

    def testAnomalyLabels(self):
        experiment = Experiment(self._config('labels'))
        paths = experiment.genAnomalies()
        dataPath = os.path.join(self.directory, 'glyphs.gdata')
        saveDataset(genGlyphs(6, 0), dataPath)

        def labels(path, anomalyLabel=None):
            return {f.anomalyLabel for f in parseFeatures(experiment.extractFeatures(path, 'activation',
                                                                                     anomalyLabel=anomalyLabel))}

        self.assertEqual(labels(experiment.cleanPath()), {0})
        self.assertEqual(labels(paths['fgsm']), {1})
        self.assertEqual(labels(paths['uniform-noise']), {1})
        self.assertEqual(labels(dataPath), {UNLABELED})
        self.assertEqual(labels(dataPath, 0), {0})

    ## One detector against all the adversarial sets together
    def testDetectPooled(self):
        experiment = Experiment(self._config('pooled'))
        scoresPath, report = experiment.detectPooled('gradient')
        self.assertEqual(report.source, 'adversarial')
        self.assertEqual(report.method, 'gradient')
        for value in (report.accuracy, report.auroc, report.aupr):
            self.assertGreaterEqual(value, 0.0)
            self.assertLessEqual(value, 1.0)
        scored = parseScores(scoresPath)
        anomalous = [s for s in scored if s.label == 1]
        self.assertEqual(len(anomalous), 2 * (len(scored) - len(anomalous)))
        self.assertLessEqual({s.sourceTag.split('-')[0] for s in anomalous}, {'fgsm', 'semantic'})

    def testCommandLine(self):
        out = os.path.join(self.directory, 'cli')
        self.assertEqual(main([]), 2)
        self.assertEqual(main(['explode']), 2)
        self.assertEqual(main(['detect', '-c', self.configPath]), 2)
        self.assertEqual(main(['run-experiment', '--bogus']), 2)
        self.assertEqual(main(['train-classifier', '-c', os.path.join(self.directory, 'missing.ini')]), 1)
        missing = os.path.join(self.directory, 'missing.gdata')
        self.assertEqual(main(['extract-features', '-c', self.configPath, '-o', out, '-d', missing]), 1)
        self.assertEqual(main(['detect', '-c', self.configPath, '-o', out, missing, missing]), 1)
        self.assertEqual(main(['gen-anomalies', '-c', self.configPath, '-o', out, '-k', missing]), 1)
        self.assertEqual(main(['train-classifier', '-c', self.configPath, '-o', out, '-s', '3']), 0)
        self.assertEqual(main(['extract-features', '-c', self.configPath, '-o', out, '-s', '3', '-m', 'activation']),
                         0)
        self.assertTrue(any(f.startswith('features-activation-clean') for f in os.listdir(out)))


if __name__ == '__main__':
    unittest.main()
