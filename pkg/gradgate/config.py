##@package config
# Experiment configuration read from INI files.

import configparser
import hashlib
import os

from .attack import AttackConfig, ATTACK_KINDS
from .classifier import TrainConfig
from .confoundinglabel import makeConfoundingLabel, LABEL_KINDS
from .data import OOD_KINDS
from .errors import ConfigError, GradGateError

FEATURE_MODES = ('gradient', 'activation')
DATA_SOURCES = ('glyphs', 'idx')
ARCHITECTURES = ('smallcnn', 'mlp')

DEFAULTS = {
    'experiment': {'seed': '0', 'out': 'output'},
    'data': {'source': 'glyphs', 'train_count': '2000', 'test_count': '500', 'val_fraction': '0.2',
             'images': '', 'labels': '', 'test_images': '', 'test_labels': '', 'holdout_class': ''},
    'classifier': {'arch': 'smallcnn', 'hidden': '64', 'epochs': '10', 'batch_size': '32', 'learning_rate': '0.05',
                   'momentum': '0.9', 'weight_decay': '0.0005'},
    'attacks': {'kinds': ','.join(ATTACK_KINDS), 'epsilon': '0.1', 'alpha': '0.01', 'iterations': '10',
                'cw_constant': '1.0', 'cw_iterations': '200', 'cw_learning_rate': '0.05', 'batch_size': '128'},
    'ood': {'kinds': ','.join(OOD_KINDS), 'count': ''},
    'features': {'mode': 'gradient', 'label': 'all-ones', 'k': '2', 'workers': '1'},
    'detector': {'hidden': '64', 'epochs': '200', 'patience': '10', 'learning_rate': '0.01', 'momentum': '0.9',
                 'batch_size': '32'},
}

## Sections whose values identify the artifacts of each stage.
STAGE_SECTIONS = {
    'classifier': ('data', 'classifier'),
    'anomalies': ('data', 'classifier', 'attacks', 'ood'),
    'features': ('data', 'classifier', 'attacks', 'ood', 'features'),
    'detector': ('data', 'classifier', 'attacks', 'ood', 'features', 'detector'),
}


## Resolved experiment configuration.
class ExperimentConfig:
    ## Constructor.
    # @param path INI file, None for the defaults only.
    # @param overrides Dictionary (section, key)/value applied after the file.
    def __init__(self, path=None, overrides=None):
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_dict(DEFAULTS)
        if path is not None:
            if not os.path.isfile(path):
                raise ConfigError('Configuration file "%s" not found.' % path)
            try:
                with open(path) as file:
                    parser.read_file(file)
            except configparser.Error as e:
                raise ConfigError('Invalid configuration file "%s": %s' % (path, e))
        for (section, key), value in (overrides or {}).items():
            parser.set(section, key, str(value))

        for section in parser.sections():
            if section not in DEFAULTS:
                raise ConfigError('Unknown configuration section [%s].' % section)
            for key in parser[section]:
                if key not in DEFAULTS[section]:
                    raise ConfigError('Unknown configuration key "%s" in [%s].' % (key, section))
        self.parser = parser

        try:
            self._resolve()
        except ValueError as e:
            raise ConfigError('Invalid configuration value: %s' % e)

    def _resolve(self):
        p = self.parser
        self.seed = p.getint('experiment', 'seed')
        self.outputDirectory = p.get('experiment', 'out')

        self.dataSource = self._choice('data', 'source', DATA_SOURCES)
        self.trainCount = p.getint('data', 'train_count')
        self.testCount = p.getint('data', 'test_count')
        self.valFraction = p.getfloat('data', 'val_fraction')
        self.idxPaths = {key: p.get('data', key) for key in ('images', 'labels', 'test_images', 'test_labels')}
        holdout = p.get('data', 'holdout_class').strip()
        self.holdoutClass = int(holdout) if holdout else None
        if self.trainCount <= 0 or self.testCount <= 0 or not 0.0 < self.valFraction < 1.0:
            raise ConfigError('Invalid data counts or validation fraction.')

        self.arch = self._choice('classifier', 'arch', ARCHITECTURES)
        self.hidden = p.getint('classifier', 'hidden')

        self.attackKinds = self._list('attacks', 'kinds', ATTACK_KINDS)
        self.attackBatchSize = p.getint('attacks', 'batch_size')
        self.oodKinds = self._list('ood', 'kinds', OOD_KINDS)
        count = p.get('ood', 'count').strip()
        self.oodCount = int(count) if count else self.testCount

        self.featureMode = self._choice('features', 'mode', FEATURE_MODES)
        self.labelKind = self._choice('features', 'label', LABEL_KINDS)
        self.labelK = p.getint('features', 'k')
        self.workers = p.getint('features', 'workers')

        self.detectorHidden = p.getint('detector', 'hidden')
        self.detectorEpochs = p.getint('detector', 'epochs')
        self.detectorPatience = p.getint('detector', 'patience')
        self.detectorLearningRate = p.getfloat('detector', 'learning_rate')
        self.detectorMomentum = p.getfloat('detector', 'momentum')
        self.detectorBatchSize = p.getint('detector', 'batch_size')

        # Build once to validate
        try:
            self.trainConfig()
            for kind in self.attackKinds:
                self.attackConfig(kind)
        except GradGateError as e:
            raise ConfigError(str(e))

    def _choice(self, section, key, choices):
        value = self.parser.get(section, key).strip()
        if value not in choices:
            raise ConfigError('Invalid %s.%s "%s" (expected one of %s).' % (section, key, value, ', '.join(choices)))
        return value

    def _list(self, section, key, choices):
        values = [v.strip() for v in self.parser.get(section, key).split(',') if v.strip()]
        for value in values:
            if value not in choices:
                raise ConfigError('Invalid %s.%s entry "%s" (expected among %s).'
                                  % (section, key, value, ', '.join(choices)))
        return values

    ## Canonical text of some sections plus the master seed.
    def canonical(self, sections=None):
        sections = sorted(DEFAULTS) if sections is None else sorted(sections)
        lines = ['experiment.seed = %s' % self.seed]
        for section in sections:
            for key in sorted(self.parser[section]):
                lines.append('%s.%s = %s' % (section, key, self.parser.get(section, key).strip()))
        return '\n'.join(lines) + '\n'

    ## Content digest of the sections relevant to a stage.
    # @param stage Stage name of STAGE_SECTIONS, None for the whole configuration.
    # @return 12 hexadecimal digits.
    def digest(self, stage=None):
        sections = None if stage is None else STAGE_SECTIONS[stage]
        return hashlib.sha256(self.canonical(sections).encode('utf-8')).hexdigest()[:12]

    ## Derive the seed of a stage from the master seed.
    def deriveSeed(self, name):
        return int.from_bytes(hashlib.sha256(('%s:%s' % (self.seed, name)).encode('utf-8')).digest()[:8], 'little')

    def trainConfig(self):
        p = self.parser
        return TrainConfig(epochs=p.getint('classifier', 'epochs'), batchSize=p.getint('classifier', 'batch_size'),
                           learningRate=p.getfloat('classifier', 'learning_rate'),
                           momentum=p.getfloat('classifier', 'momentum'),
                           weightDecay=p.getfloat('classifier', 'weight_decay'), seed=self.deriveSeed('train'))

    def attackConfig(self, kind):
        p = self.parser
        return AttackConfig(kind, epsilon=p.getfloat('attacks', 'epsilon'), alpha=p.getfloat('attacks', 'alpha'),
                            iterations=p.getint('attacks', 'iterations'),
                            cwConstant=p.getfloat('attacks', 'cw_constant'),
                            cwIterations=p.getint('attacks', 'cw_iterations'),
                            cwLearningRate=p.getfloat('attacks', 'cw_learning_rate'),
                            seed=self.deriveSeed('attack:%s' % kind))

    def confoundingLabel(self, classes):
        return makeConfoundingLabel(classes, self.labelKind, k=self.labelK, seed=self.deriveSeed('label'))

    ## @var parser
    # ConfigParser with the resolved values.
    ## @var seed
    # Master seed.
