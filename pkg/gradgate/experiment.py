##@package experiment
# Stages of the detection experiment. Every artifact is named after the digest of the configuration sections it
# depends on, so that existing artifacts are reused and an interrupted run resumes where it stopped.

import csv
import hashlib
import logging
import os

import numpy as np

from .architecture import ArchSpec
from .attack import AttackResult, createAttack, checkResult, ATTACK_KINDS
from .classifier import buildClassifier, trainClassifier, saveCheckpoint, loadCheckpoint
from .config import FEATURE_MODES
from .container import fileDigest
from .csv_interface import writeFeatures, parseFeatures, writeScores
from .data import Dataset, genGlyphs, genOod, split, saveDataset, loadDataset, OOD_LABEL, OOD_KINDS
from .detector import assembleDetectionSets, trainDetector, score, mspScores
from .errors import ConfigError, DetectorError, InvariantError
from .featureextractor import GradientFeatureExtractor, ActivationFeatureExtractor, Feature, featureMatrix, UNLABELED, \
    layerwiseGradientNorms, normSummary, singleFeatureAurocs
from .idx_interface import loadIdx
from .metrics import ScoredSample, evaluate

logger = logging.getLogger(__name__)

CLEAN_TAG = 'clean'
HOLDOUT_TAG = 'holdout'
POOLED_TAG = 'adversarial'
MSP_METHOD = 'msp'
METHODS = FEATURE_MODES + (MSP_METHOD,)


## Write a file through a temporary file so that a partial file never carries the final name.
def _atomicWrite(path, writer):
    temporary = path + '.tmp'
    writer(temporary)
    os.replace(temporary, path)


## Short digest of the contents of input files and of extra values, keying the artifacts derived from them.
def _inputsDigest(paths, *values):
    digest = hashlib.sha256()
    for path in paths:
        digest.update(fileDigest(path).encode('ascii'))
    for value in values:
        digest.update((':%s' % value).encode('ascii'))
    return digest.hexdigest()[:12]


## Experiment pipeline driven by an ExperimentConfig.
class Experiment:
    def __init__(self, config):
        self.config = config
        self.outputDirectory = config.outputDirectory
        os.makedirs(self.outputDirectory, exist_ok=True)
        self._data = None
        self._model = None

    def _path(self, name):
        return os.path.join(self.outputDirectory, name)

    ## Train, validation and clean test sets, plus the held-out class images if configured.
    # @return Tuple (train, validation, test, heldOut) with heldOut None without held-out class.
    def loadData(self):
        if self._data is not None:
            return self._data
        c = self.config
        if c.dataSource == 'glyphs':
            full = genGlyphs(c.trainCount, c.deriveSeed('glyphs:train'))
            test = genGlyphs(c.testCount, c.deriveSeed('glyphs:test'))
        else:
            for key in ('images', 'labels'):
                if not c.idxPaths[key] or not os.path.isfile(c.idxPaths[key]):
                    raise ConfigError('IDX %s file "%s" not found.' % (key, c.idxPaths[key]))
            full = loadIdx(c.idxPaths['images'], c.idxPaths['labels'])
            if c.idxPaths['test_images']:
                for key in ('test_images', 'test_labels'):
                    if not os.path.isfile(c.idxPaths[key]):
                        raise ConfigError('IDX %s file "%s" not found.' % (key, c.idxPaths[key]))
                test = loadIdx(c.idxPaths['test_images'], c.idxPaths['test_labels'])
            else:
                full, test = split(full, (0.8, 0.2), c.deriveSeed('split:test'))
            test = test.subset(np.arange(min(len(test), c.testCount)))

        train, val = split(full, (1.0 - c.valFraction, c.valFraction), c.deriveSeed('split:val'))
        heldOut = None
        if c.holdoutClass is not None:
            heldOut = test.onlyClasses([c.holdoutClass]).unlabeled(HOLDOUT_TAG)
            if len(heldOut) == 0:
                raise ConfigError('No test image of the held-out class %s.' % c.holdoutClass)
            train = train.withoutClasses([c.holdoutClass])
            val = val.withoutClasses([c.holdoutClass])
            test = test.withoutClasses([c.holdoutClass])
        self._data = (train, val, test.subset(np.arange(len(test)), CLEAN_TAG), heldOut)
        return self._data

    def classes(self):
        if self.config.dataSource == 'glyphs':
            return 10
        train, val, test, heldOut = self.loadData()
        return int(max(train.labels.max(), val.labels.max(), test.labels.max(),
                       self.config.holdoutClass if self.config.holdoutClass is not None else 0)) + 1

    def checkpointPath(self):
        return self._path('classifier-%s.ggate' % self.config.digest('classifier'))

    ## Train the classifier, or reuse an existing checkpoint.
    # @return Path of the checkpoint.
    def trainClassifier(self):
        path = self.checkpointPath()
        if os.path.isfile(path):
            logger.info('Reusing classifier "%s".', path)
            return path

        train, val, test, _ = self.loadData()
        inputShape = train.images.shape[1:]
        if self.config.arch == 'smallcnn':
            arch = ArchSpec.smallCnn(inputShape, self.classes())
        else:
            arch = ArchSpec.mlp(inputShape, self.classes(), self.config.hidden)
        model = buildClassifier(arch, self.config.deriveSeed('init'))
        model, history = trainClassifier(model, train, val, self.config.trainConfig())
        model.metadata['testAccuracy'] = '%.17g' % model.accuracy(test.images, test.labels)
        logger.info('Classifier test accuracy: %s', model.metadata['testAccuracy'])

        _atomicWrite(path, lambda p: saveCheckpoint(model, p))
        _atomicWrite(path[:-len('.ggate')] + '.history.csv', lambda p: _writeHistory(history, p))
        self._model = model
        return path

    def loadClassifier(self, checkpointPath=None):
        if checkpointPath is not None:
            return loadCheckpoint(checkpointPath)
        if self._model is None:
            self._model = loadCheckpoint(self.trainClassifier())
        return self._model

    def cleanPath(self):
        return self._path('%s-%s.gdata' % (CLEAN_TAG, self.config.digest('classifier')))

    ## Generate the adversarial and out-of-distribution sets.
    # Existing files are reused but always pass the consistency gates again.
    # @param checkpointPath Classifier checkpoint, None for the one of the configuration.
    # @return Dictionary source/path of the anomalous sets, in configuration order.
    def genAnomalies(self, checkpointPath=None):
        c = self.config
        checkpoint = self.trainClassifier() if checkpointPath is None else checkpointPath
        model = self.loadClassifier(checkpointPath)
        train, val, test, heldOut = self.loadData()
        if not os.path.isfile(self.cleanPath()):
            _atomicWrite(self.cleanPath(), lambda p: saveDataset(test, p))

        digest = c.digest('anomalies')
        modelDigest = _inputsDigest([checkpoint])
        paths = {}
        for kind in c.attackKinds:
            attackConfig = c.attackConfig(kind)
            path = self._path('%s-%s-%s.gdata' % (kind, digest, modelDigest))
            if not os.path.isfile(path):
                logger.info('Generating %s adversarial images.', kind)
                result = createAttack(attackConfig, c.attackBatchSize, c.workers).generate(model, test.images,
                                                                                            test.labels)
                checkResult(result, test.images, attackConfig)
                adversarial = Dataset(result.images, test.labels, attackConfig.sourceTag(), attackConfig.seed)
                _atomicWrite(path, lambda p: saveDataset(adversarial, p))
            else:
                logger.info('Reusing "%s".', path)
                stored = loadDataset(path)
                checkResult(AttackResult(stored.images, None, None, None), test.images, attackConfig)
            paths[kind] = path

        for kind in c.oodKinds:
            path = self._path('%s-%s.gdata' % (kind, digest))
            if not os.path.isfile(path):
                dataset = genOod(kind, c.oodCount, c.deriveSeed('ood:%s' % kind))
                _atomicWrite(path, lambda p: saveDataset(dataset, p))
            if not np.all(loadDataset(path).labels == OOD_LABEL):
                raise InvariantError('Out-of-distribution set "%s" carries class labels.' % path)
            paths[kind] = path

        if heldOut is not None:
            path = self._path('%s-%s.gdata' % (HOLDOUT_TAG, digest))
            if not os.path.isfile(path):
                _atomicWrite(path, lambda p: saveDataset(heldOut, p))
            paths[HOLDOUT_TAG] = path
        return paths

    def _extractor(self, model, mode):
        if mode == 'gradient':
            return GradientFeatureExtractor(self.config.confoundingLabel(model.arch.classes),
                                            workers=self.config.workers)
        if mode == 'activation':
            return ActivationFeatureExtractor(self.config.workers)
        raise ConfigError('Unknown feature mode "%s".' % mode)

    ## Extract the features of a persisted dataset into a CSV file.
    # @param datasetPath Path of a GDATA file.
    # @param mode "gradient" or "activation", None for the configured mode.
    # @param checkpointPath Classifier checkpoint, None for the one of the configuration.
    # @param anomalyLabel Anomaly label written in the file, None to derive it from the source of the dataset.
    # @return Path of the CSV file, named after the contents of the dataset and of the checkpoint and the label.
    def extractFeatures(self, datasetPath, mode=None, checkpointPath=None, anomalyLabel=None):
        mode = self.config.featureMode if mode is None else mode
        checkpoint = self.trainClassifier() if checkpointPath is None else checkpointPath
        dataset = loadDataset(datasetPath)
        if anomalyLabel is None:
            anomalyLabel = sourceAnomalyLabel(dataset.sourceTag)
        name = os.path.splitext(os.path.basename(datasetPath))[0]
        path = self._path('features-%s-%s-%s-%s.csv' % (mode, name, self.config.digest('features'),
                                                         _inputsDigest([checkpoint, datasetPath], anomalyLabel)))
        if os.path.isfile(path):
            logger.info('Reusing "%s".', path)
            return path

        model = self.loadClassifier(checkpointPath)
        features = self._extractor(model, mode).extract(model, dataset.images, dataset.sourceTag, anomalyLabel)
        matrix = featureMatrix(features)
        if not np.all(np.isfinite(matrix)) or np.any(matrix < 0.0):
            raise InvariantError('Negative or non-finite %s features for "%s".' % (mode, datasetPath))
        _atomicWrite(path, lambda p: writeFeatures(features, p))
        return path

    ## Train and evaluate a detector on two feature files.
    # @param normalCsv Features of normal inputs.
    # @param anomalousCsv Features of anomalous inputs.
    # @param method Name of the method in the report, the configured feature mode by default.
    # @return Tuple (scores path, MetricReport).
    def detect(self, normalCsv, anomalousCsv, method=None):
        method = self.config.featureMode if method is None else method
        normal = parseFeatures(normalCsv, method)
        anomalous = parseFeatures(anomalousCsv, method)
        if len(normal) == 0 or len(anomalous) == 0:
            raise DetectorError('Empty feature file: %s normal and %s anomalous samples.'
                                % (len(normal), len(anomalous)))
        return self._detectFeatures(normal, anomalous, method, _sourceName(anomalous[0].sourceTag))

    ## Train and evaluate one detector on the clean set against all the adversarial sets together.
    # @param mode "gradient" or "activation", None for the configured mode.
    # @param checkpointPath Classifier checkpoint, None for the one of the configuration.
    # @return Tuple (scores path, MetricReport) with source "adversarial".
    def detectPooled(self, mode=None, checkpointPath=None):
        mode = self.config.featureMode if mode is None else mode
        anomalies = self.genAnomalies(checkpointPath)
        normal = parseFeatures(self.extractFeatures(self.cleanPath(), mode, checkpointPath), mode)
        anomalous = []
        for kind in self.config.attackKinds:
            anomalous.extend(parseFeatures(self.extractFeatures(anomalies[kind], mode, checkpointPath), mode))
        if len(anomalous) == 0:
            raise DetectorError('No adversarial set configured.')
        return self._detectFeatures(normal, anomalous, mode, POOLED_TAG)

    def _detectFeatures(self, normal, anomalous, method, source):
        c = self.config
        seed = c.deriveSeed('detector')
        train, val, test = assembleDetectionSets(normal, anomalous, seed)
        detector = trainDetector(train, val, hidden=c.detectorHidden, seed=seed, epochs=c.detectorEpochs,
                                 patience=c.detectorPatience, learningRate=c.detectorLearningRate,
                                 momentum=c.detectorMomentum, batchSize=c.detectorBatchSize)
        scored = score(detector, test)
        report = evaluate(scored, source, method, c.digest('detector'))
        _checkReport(report)

        name = '%s-%s-%s' % (method, source, c.digest('detector'))
        scoresPath = self._path('scores-%s.csv' % name)
        _atomicWrite(scoresPath, lambda p: writeScores(scored, p))
        _atomicWrite(self._path('report-%s.txt' % name), lambda p: _writeText(report.toText(), p))
        return scoresPath, report

    ## Evaluate the maximum softmax probability baseline on the test part of the detection split.
    # @param model Classifier.
    # @param normal Dataset of normal inputs.
    # @param anomalous Dataset of anomalous inputs.
    # @param source Name of the anomaly source.
    # @return MetricReport.
    def mspReport(self, model, normal, anomalous, source):
        sides = []
        for dataset, label in ((normal, 0), (anomalous, 1)):
            scored = mspScores(model, dataset.images, label, dataset.sourceTag)
            sides.append([Feature([s.score], s.sampleId, s.sourceTag, label) for s in scored])
        _, _, test = assembleDetectionSets(sides[0], sides[1], self.config.deriveSeed('detector'))
        scored = [ScoredSample(sampleId, label, values[0], tag)
                  for sampleId, label, values, tag in zip(test.sampleIds, test.labels, test.matrix, test.sourceTags)]
        report = evaluate(scored, source, MSP_METHOD, self.config.digest('detector'))
        _checkReport(report)
        return report

    ## Run all stages and report every (anomaly source, method) pair.
    # @return List of MetricReport.
    def runExperiment(self):
        checkpoint = self.trainClassifier()
        model = self.loadClassifier()
        anomalies = self.genAnomalies(checkpoint)
        clean = loadDataset(self.cleanPath())

        reports = []
        for source, path in anomalies.items():
            for mode in FEATURE_MODES:
                normalCsv = self.extractFeatures(self.cleanPath(), mode)
                anomalousCsv = self.extractFeatures(path, mode)
                _, report = self.detect(normalCsv, anomalousCsv, mode)
                report.source = source
                reports.append(report)
            reports.append(self.mspReport(model, clean, loadDataset(path), source))

        text = ''.join(r.toText() for r in reports)
        _atomicWrite(self._path('report-%s.txt' % self.config.digest('detector')), lambda p: _writeText(text, p))
        return reports

    ## Per-layer distribution of gradient and activation norms per source.
    # @param datasetPaths GDATA files to compare with the clean test set, None for all anomaly sources.
    # @param checkpointPath Classifier checkpoint, None for the one of the configuration.
    # @return Text of the summary table.
    def compareNorms(self, datasetPaths=None, checkpointPath=None):
        model = self.loadClassifier(checkpointPath)
        if datasetPaths is None:
            datasetPaths = list(self.genAnomalies(checkpointPath).values())
        if not os.path.isfile(self.cleanPath()):
            _atomicWrite(self.cleanPath(), lambda p: saveDataset(self.loadData()[2], p))
        datasets = [loadDataset(self.cleanPath())] + [loadDataset(p) for p in datasetPaths]

        norms = {mode: {} for mode in FEATURE_MODES}
        for dataset in datasets:
            tag = _sourceName(dataset.sourceTag)
            gradients = self._extractor(model, 'gradient').extract(model, dataset.images, tag)
            activations = self._extractor(model, 'activation').extract(model, dataset.images, tag)
            norms['gradient'][tag] = layerwiseGradientNorms(model, featureMatrix(gradients))
            norms['activation'][tag] = featureMatrix(activations)

        text = formatNormComparison(norms)
        _atomicWrite(self._path('compare-norms-%s.txt' % self.config.digest('features')),
                     lambda p: _writeText(text, p))
        return text


## Text blocks of the norm comparison, one per mode and layer.
# @param norms Dictionary mode/dictionary tag/(count, layers) matrix, the first tag being the clean set.
# @return Text.
def formatNormComparison(norms):
    lines = []
    for mode, groups in norms.items():
        summary = normSummary(groups)
        tags = list(groups)
        clean = groups[tags[0]]
        layers = clean.shape[1]
        for layer in range(layers):
            lines.append('[%s layer%s]' % (mode, layer))
            lines.append('%-24s %12s %12s %12s %12s %12s %8s' % ('source', 'min', 'q1', 'median', 'q3', 'max',
                                                                 'AUROC'))
            for tag in tags:
                stats = summary[tag][layer]
                auroc = '-' if tag == tags[0] else \
                    '%.4f' % singleFeatureAurocs(clean[:, layer:layer + 1], groups[tag][:, layer:layer + 1])[0]
                lines.append('%-24s %12.6g %12.6g %12.6g %12.6g %12.6g %8s' % ((tag,) + tuple(stats) + (auroc,)))
            lines.append('')
    return '\n'.join(lines)


## Source name of a source tag: attack tags carry a configuration digest after the kind.
def _sourceName(sourceTag):
    for kind in ('fgsm', 'bim', 'pgd', 'iterll', 'cw', 'semantic'):
        if sourceTag.startswith(kind + '-'):
            return kind
    return sourceTag


## Anomaly label of a dataset from its source tag.
# @param sourceTag Source tag of the dataset.
# @return 0 for the clean test set, 1 for the generated anomaly sources, UNLABELED for any other source.
def sourceAnomalyLabel(sourceTag):
    if sourceTag == CLEAN_TAG:
        return 0
    if _sourceName(sourceTag) in ATTACK_KINDS + OOD_KINDS + (HOLDOUT_TAG,):
        return 1
    return UNLABELED


def _checkReport(report):
    for name in ('accuracy', 'auroc', 'aupr'):
        value = getattr(report, name)
        if not 0.0 <= value <= 1.0:
            raise InvariantError('%s of %s/%s is %s, outside [0,1].' % (name, report.source, report.method, value))


def _writeText(text, path):
    with open(path, 'w') as file:
        file.write(text)


def _writeHistory(history, path):
    with open(path, 'w', newline='') as file:
        writer = csv.writer(file, lineterminator='\n')
        writer.writerow(['epoch', 'train_loss', 'train_accuracy', 'val_accuracy'])
        for entry in history:
            writer.writerow([entry['epoch'], '%.17g' % entry['trainLoss'], '%.17g' % entry['trainAccuracy'],
                             '%.17g' % entry['valAccuracy'] if 'valAccuracy' in entry else ''])
