##@package attack
# Common machinery of the adversarial attacks.

import hashlib
import logging
from abc import ABCMeta, abstractmethod
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import tensor as T
from .errors import AttackError, InvariantError
from .losses import softmaxCrossEntropy

logger = logging.getLogger(__name__)

ATTACK_KINDS = ('fgsm', 'bim', 'pgd', 'iterll', 'cw', 'semantic')
NORM_BOUNDED_KINDS = ('fgsm', 'bim', 'pgd', 'iterll')
BUDGET_TOLERANCE = 1e-12


## Parameters of an attack.
class AttackConfig:
    ## Constructor.
    # @param kind One of fgsm, bim, pgd, iterll, cw, semantic.
    # @param epsilon L-infinity budget in pixel units.
    # @param alpha Step size of the iterative attacks.
    # @param iterations Number of steps of the iterative attacks.
    # @param cwConstant Trade-off constant c of the Carlini-Wagner attack.
    # @param cwIterations Number of gradient descent steps of the Carlini-Wagner attack.
    # @param cwLearningRate Learning rate of the Carlini-Wagner attack.
    # @param seed Seed of the random start.
    def __init__(self, kind, epsilon=0.1, alpha=0.01, iterations=10, cwConstant=1.0, cwIterations=200,
                 cwLearningRate=0.05, seed=0):
        if kind not in ATTACK_KINDS:
            raise AttackError('Unknown attack "%s" (expected one of %s).' % (kind, ', '.join(ATTACK_KINDS)))
        if epsilon < 0:
            raise AttackError('Negative budget %s.' % epsilon)
        if alpha <= 0 or iterations < 1:
            raise AttackError('Invalid step size %s or iteration count %s.' % (alpha, iterations))
        if cwConstant <= 0 or cwIterations < 1 or cwLearningRate <= 0:
            raise AttackError('Invalid Carlini-Wagner constant %s, iterations %s or learning rate %s.'
                              % (cwConstant, cwIterations, cwLearningRate))
        self.kind = kind
        self.epsilon = epsilon
        self.alpha = alpha
        self.iterations = iterations
        self.cwConstant = cwConstant
        self.cwIterations = cwIterations
        self.cwLearningRate = cwLearningRate
        self.seed = seed

    def describe(self):
        return 'kind=%s;epsilon=%r;alpha=%r;iterations=%s;cwConstant=%r;cwIterations=%s;cwLearningRate=%r;seed=%s' \
               % (self.kind, self.epsilon, self.alpha, self.iterations, self.cwConstant, self.cwIterations,
                  self.cwLearningRate, self.seed)

    def digest(self):
        return hashlib.sha256(self.describe().encode('utf-8')).hexdigest()[:12]

    ## Source tag of the generated images: kind and configuration digest.
    def sourceTag(self):
        return '%s-%s' % (self.kind, self.digest())


## Adversarial images with per-sample success flags and perturbation norms.
class AttackResult:
    def __init__(self, images, success, linf, l2, targets=None):
        self.images = images
        self.success = success
        self.linf = linf
        self.l2 = l2
        self.targets = targets

    ## Build a result computing the perturbation norms.
    # @param clean Original images.
    # @param adversarial Adversarial images.
    # @param success Per-sample success flags.
    # @param targets Optional target classes.
    @staticmethod
    def measure(clean, adversarial, success, targets=None):
        delta = (adversarial - clean).reshape(len(clean), -1)
        return AttackResult(adversarial, np.asarray(success, dtype=bool), np.abs(delta).max(axis=1, initial=0.0),
                            np.sqrt((delta * delta).sum(axis=1)), targets)

    def successRate(self):
        return float(np.mean(self.success)) if len(self.success) else 0.0

    ## @var images
    # Adversarial images in [0,1].
    ## @var success
    # Per-sample flags: prediction changed, or target hit for targeted attacks.
    ## @var linf
    # Per-sample L-infinity perturbation norms.
    ## @var l2
    # Per-sample L2 perturbation norms.
    ## @var targets
    # Target classes of targeted attacks, None otherwise.


## Gradient of the summed cross-entropy with respect to the input images.
# @param model Classifier.
# @param images Images in pixel space.
# @param targets Class ids.
# @return Tensor of the shape of the images.
def inputGradient(model, images, targets):
    with T.GradientTape() as tape:
        x = tape.variable(images)
        logits, _ = model.graph(tape, x)
        loss = softmaxCrossEntropy(logits, targets, reduction='sum')
    return T.gradWrtInput(tape, loss, x)


## Seed of one sample, independent of the batching.
def sampleGenerator(seed, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


## Abstract adversarial attack.
class Attack(metaclass=ABCMeta):
    normBounded = True

    ## Constructor.
    # @param config AttackConfig.
    # @param batchSize Number of images attacked together.
    # @param workers Number of threads attacking batches in parallel.
    def __init__(self, config, batchSize=128, workers=1):
        self.config = config
        self.batchSize = batchSize
        self.workers = workers

    ## Attack images.
    # Samples are independent: the result does not depend on the batch size nor on the number of workers.
    # @param model Classifier.
    # @param images Clean images in [0,1].
    # @param labels True class ids.
    # @return AttackResult.
    def generate(self, model, images, labels):
        labels = np.asarray(labels, dtype=np.int64)
        starts = list(range(0, len(images), self.batchSize))

        def run(start):
            indices = np.arange(start, min(start + self.batchSize, len(images)))
            return self._attackBatch(model, images[indices], labels[indices], indices)

        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                results = list(executor.map(run, starts))
        else:
            results = [run(start) for start in starts]

        targets = None
        if results and results[0].targets is not None:
            targets = np.concatenate([r.targets for r in results])
        result = AttackResult(np.concatenate([r.images for r in results]),
                              np.concatenate([r.success for r in results]),
                              np.concatenate([r.linf for r in results]),
                              np.concatenate([r.l2 for r in results]), targets)
        logger.info('%s: success rate %.4f on %s images', self.config.kind, result.successRate(), len(images))
        return result

    ## Attack one batch.
    # @param model Classifier.
    # @param images Clean images.
    # @param labels True class ids.
    # @param indices Positions of the images in the attacked set.
    # @return AttackResult.
    @abstractmethod
    def _attackBatch(self, model, images, labels, indices):
        return None

    ## @var config
    # AttackConfig.


## Instantiate the attack of a configuration.
# @param config AttackConfig.
# @param batchSize Number of images attacked together.
# @param workers Number of threads.
# @return Attack.
def createAttack(config, batchSize=128, workers=1):
    from .signattacks import FgsmAttack, BimAttack, PgdAttack, IterLlAttack
    from .cwattack import CarliniWagnerAttack
    from .semanticattack import SemanticAttack

    attacks = {'fgsm': FgsmAttack, 'bim': BimAttack, 'pgd': PgdAttack, 'iterll': IterLlAttack,
               'cw': CarliniWagnerAttack, 'semantic': SemanticAttack}
    return attacks[config.kind](config, batchSize=batchSize, workers=workers)


## Check the validity of an attack result.
# @param result AttackResult.
# @param clean Clean images.
# @param config AttackConfig.
def checkResult(result, clean, config):
    if result.images.shape != clean.shape:
        raise InvariantError('%s: adversarial images of shape %s for clean images %s.'
                             % (config.kind, result.images.shape, clean.shape))
    if result.images.min() < 0.0 or result.images.max() > 1.0:
        raise InvariantError('%s: adversarial pixels outside [0,1].' % config.kind)
    if config.kind in NORM_BOUNDED_KINDS:
        delta = np.abs(result.images - clean).reshape(len(clean), -1).max(axis=1, initial=0.0)
        violations = np.flatnonzero(delta > config.epsilon + BUDGET_TOLERANCE)
        if len(violations) > 0:
            raise InvariantError('%s: %s samples exceed the budget %s (first: sample %s with %.17g).'
                                 % (config.kind, len(violations), config.epsilon, violations[0],
                                    delta[violations[0]]))
