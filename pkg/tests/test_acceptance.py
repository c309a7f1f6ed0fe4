import os
import shutil
import tempfile
import unittest

import numpy as np

from gradgate.attack import createAttack, checkResult
from gradgate.config import ExperimentConfig
from gradgate.data import loadDataset
from gradgate.experiment import Experiment
from gradgate.featureextractor import extractGradientFeatures, extractActivationFeatures, featureMatrix, \
    layerwiseGradientNorms, singleFeatureAurocs
from gradgate.signattacks import fgsm, bim

ACCEPTANCE = os.environ.get('GRADGATE_ACCEPTANCE') == '1'


## Full-size checks of the detection method on the default experiment.
@unittest.skipUnless(ACCEPTANCE, 'set GRADGATE_ACCEPTANCE=1 to run the acceptance tests')
class TestAcceptance(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.directory = tempfile.mkdtemp()
        cls.config = ExperimentConfig(overrides={('experiment', 'out'): cls.directory})
        cls.experiment = Experiment(cls.config)
        cls.reports = {(r.source, r.method): r for r in cls.experiment.runExperiment()}
        cls.model = cls.experiment.loadClassifier()
        cls.clean = loadDataset(cls.experiment.cleanPath())

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.directory)

    def testAttackValidity(self):
        images, labels = self.clean.images, self.clean.labels
        cleanAccuracy = self.model.accuracy(images, labels)
        self.assertGreaterEqual(cleanAccuracy, 0.95)
        for kind in ('fgsm', 'bim', 'pgd'):
            config = self.config.attackConfig(kind)
            result = createAttack(config).generate(self.model, images, labels)
            checkResult(result, images, config)
            self.assertLessEqual(self.model.accuracy(result.images, labels), cleanAccuracy - 0.4)
        self.assertTrue(np.array_equal(bim(self.model, images, labels, 0.1, 0.1, 1).images,
                                       fgsm(self.model, images, labels, 0.1).images))

    ## Gradient norms separate clean and adversarial inputs better than activation norms
    def testGradientBeatsActivation(self):
        label = self.config.confoundingLabel(10)
        adversarial = np.concatenate([loadDataset(p).images for source, p in self.experiment.genAnomalies().items()
                                      if source in self.config.attackKinds])
        gradients = [layerwiseGradientNorms(self.model, featureMatrix(extractGradientFeatures(self.model, x, label)))
                     for x in (self.clean.images, adversarial)]
        activations = [featureMatrix(extractActivationFeatures(self.model, x)) for x in (self.clean.images, adversarial)]
        gradientAurocs = singleFeatureAurocs(*gradients)
        activationAurocs = singleFeatureAurocs(*activations)
        self.assertGreater(np.sum(gradientAurocs > activationAurocs), len(gradientAurocs) / 2.0)
        self.assertGreater(self.experiment.detectPooled('gradient')[1].auroc,
                           self.experiment.detectPooled('activation')[1].auroc)
        for source in self.config.attackKinds:
            self.assertGreater(self.reports[(source, 'gradient')].auroc, self.reports[(source, 'activation')].auroc)

    def testAdversarialDetection(self):
        for source in ('fgsm', 'bim', 'pgd', 'iterll', 'semantic', 'cw'):
            self.assertGreaterEqual(self.reports[(source, 'gradient')].auroc, 0.85, source)

    def testOodDetection(self):
        self.assertGreaterEqual(self.reports[('uniform-noise', 'gradient')].auroc, 0.95)
        self.assertGreaterEqual(self.reports[('gaussian-noise', 'gradient')].auroc, 0.95)
        self.assertLessEqual(self.reports[('textures', 'gradient')].auroc,
                             self.reports[('uniform-noise', 'gradient')].auroc)

    def testDeterminism(self):
        directory = tempfile.mkdtemp()
        try:
            config = ExperimentConfig(overrides={('experiment', 'out'): directory})
            again = Experiment(config).runExperiment()
        finally:
            shutil.rmtree(directory)
        self.assertEqual([r.toText() for r in again],
                         [self.reports[(r.source, r.method)].toText() for r in again])


if __name__ == '__main__':
    unittest.main()
