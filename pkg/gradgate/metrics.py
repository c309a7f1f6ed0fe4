##@package metrics
# Detection metrics: AUROC, AUPR and detection accuracy.

import numpy as np
from sklearn.metrics import roc_auc_score, average_precision_score

from .errors import DetectorError

DEFAULT_THRESHOLD = 0.5


## Scored sample: anomalous samples are positive.
class ScoredSample:
    def __init__(self, sampleId, label, score, sourceTag):
        self.sampleId = sampleId
        self.label = int(label)
        self.score = float(score)
        self.sourceTag = sourceTag

    def __repr__(self):
        return 'ScoredSample(%s, %s, label=%s, score=%.6g)' % (self.sourceTag, self.sampleId, self.label, self.score)


def _arrays(scored):
    labels = np.array([s.label for s in scored], dtype=np.int64)
    scores = np.array([s.score for s in scored], dtype=np.float64)
    return labels, scores


## Area under the ROC curve from labels and scores, ties counting half.
# @param labels Binary labels, 1 being positive.
# @param scores Scores, higher meaning more anomalous.
# @return Value in [0,1].
def rocArea(labels, scores):
    labels = np.asarray(labels)
    positives = int(np.sum(labels == 1))
    negatives = len(labels) - positives
    if positives == 0 or negatives == 0:
        raise DetectorError('AUROC needs both labels, got %s positives and %s negatives.' % (positives, negatives))
    return float(roc_auc_score(labels == 1, np.asarray(scores, dtype=np.float64)))


## Area under the ROC curve of scored samples.
def auroc(scored):
    return rocArea(*_arrays(scored))


## Area under the precision-recall curve from labels and scores.
# Average precision: step-wise sum over the distinct thresholds of (recall increment) x precision.
# @param labels Binary labels, 1 being positive.
# @param scores Scores.
# @return Value in [0,1].
def precisionRecallArea(labels, scores):
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    positives = int(np.sum(labels == 1))
    if positives == 0:
        raise DetectorError('AUPR needs positive samples.')
    return float(average_precision_score(labels == 1, scores))


## Area under the precision-recall curve of scored samples, anomalous being positive.
def aupr(scored):
    return precisionRecallArea(*_arrays(scored))


## Fraction of samples correctly classified; a sample is predicted anomalous if its score >= threshold.
def detectionAccuracy(scored, threshold=DEFAULT_THRESHOLD):
    labels, scores = _arrays(scored)
    if len(labels) == 0:
        raise DetectorError('Detection accuracy of an empty set.')
    return float(np.mean((scores >= threshold).astype(np.int64) == labels))


## Metrics of one detection method on one anomaly source.
class MetricReport:
    def __init__(self, source, method, accuracy, auroc, aupr, counts, configDigest):
        self.source = source
        self.method = method
        self.accuracy = accuracy
        self.auroc = auroc
        self.aupr = aupr
        self.counts = counts
        self.configDigest = configDigest

    ## Key-value text form.
    def toText(self):
        prefix = '%s.%s' % (self.source, self.method)
        lines = ['%s.accuracy = %.17g' % (prefix, self.accuracy),
                 '%s.auroc = %.17g' % (prefix, self.auroc),
                 '%s.aupr = %.17g' % (prefix, self.aupr)]
        for tag in sorted(self.counts):
            lines.append('%s.count.%s = %s' % (prefix, tag, self.counts[tag]))
        lines.append('%s.config = %s' % (prefix, self.configDigest))
        return '\n'.join(lines) + '\n'

    def __eq__(self, other):
        return isinstance(other, MetricReport) and self.toText() == other.toText()

    ## @var counts
    # Dictionary source tag/number of test samples.


## Compute the metrics of scored test samples.
# @param scored List of ScoredSample.
# @param source Name of the anomaly source.
# @param method Name of the detection method.
# @param configDigest Digest of the configuration.
# @param threshold Threshold of the detection accuracy.
# @return MetricReport.
def evaluate(scored, source, method, configDigest='', threshold=DEFAULT_THRESHOLD):
    counts = {}
    for s in scored:
        counts[s.sourceTag] = counts.get(s.sourceTag, 0) + 1
    return MetricReport(source, method, detectionAccuracy(scored, threshold), auroc(scored), aupr(scored), counts,
                        configDigest)


## Aligned table of reports.
def formatTable(reports):
    header = ('Source', 'Method', 'Accuracy', 'AUROC', 'AUPR')
    rows = [(r.source, r.method, '%.2f' % (100.0 * r.accuracy), '%.2f' % (100.0 * r.auroc),
             '%.2f' % (100.0 * r.aupr)) for r in reports]
    widths = [max(len(row[c]) for row in [header] + rows) for c in range(len(header))]
    lines = []
    for n, row in enumerate([header] + rows):
        lines.append('  '.join(cell.ljust(widths[c]) if c < 2 else cell.rjust(widths[c])
                               for c, cell in enumerate(row)))
        if n == 0:
            lines.append('  '.join('-' * w for w in widths))
    return '\n'.join(lines)
