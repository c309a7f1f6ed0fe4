##@package csv_interface
# CSV files of feature vectors and detector scores.

import csv

from .errors import DataError
from .featureextractor import Feature, GradFeature, ActivFeature
from .metrics import ScoredSample

FEATURE_CLASSES = {'gradient': GradFeature, 'activation': ActivFeature}


def _formatFloat(value):
    return '%.17g' % value


## Write features into a CSV file.
# The header is sample_id,anomaly_label,source_tag,f0,...,f{P-1}; floats are written with 17 significant digits.
# @param features List of features of equal length.
# @param path Output file path.
def writeFeatures(features, path):
    columns = len(features[0]) if features else 0
    with open(path, 'w', newline='') as file:
        writer = csv.writer(file, lineterminator='\n')
        writer.writerow(['sample_id', 'anomaly_label', 'source_tag'] + ['f%s' % c for c in range(columns)])
        for f in features:
            if len(f) != columns:
                raise DataError('Feature of sample %s has %s entries, expected %s.' % (f.sampleId, len(f), columns))
            writer.writerow([f.sampleId, f.anomalyLabel, f.sourceTag] + [_formatFloat(v) for v in f.values])


## Parse a CSV file of features.
# @param filePath Path to the CSV file.
# @param kind "gradient" or "activation", selecting the feature class.
# @return List of features.
def parseFeatures(filePath, kind='gradient'):
    with open(filePath, newline='') as file:
        return parseFeatureData(file, kind)


## Parse features from an open file.
# @param file File pointer.
# @param kind "gradient" or "activation".
# @return List of features.
def parseFeatureData(file, kind='gradient'):
    featureClass = FEATURE_CLASSES.get(kind, Feature)
    reader = csv.reader(file)

    # Header
    try:
        header = next(reader)
    except StopIteration:
        raise DataError('Empty feature file.')
    if header[:3] != ['sample_id', 'anomaly_label', 'source_tag']:
        raise DataError('Invalid feature header %s.' % header[:3])
    columns = len(header) - 3

    # Content
    features = []
    for line, row in enumerate(reader, start=2):
        if len(row) != columns + 3:
            raise DataError('Line %s holds %s fields, expected %s.' % (line, len(row), columns + 3))
        try:
            features.append(featureClass([float(v) for v in row[3:]], int(row[0]), row[2], int(row[1])))
        except ValueError as e:
            raise DataError('Line %s: %s' % (line, e))
    return features


## Write scored samples into a CSV file with header sample_id,anomaly_label,score,source_tag.
# @param scored List of ScoredSample.
# @param path Output file path.
def writeScores(scored, path):
    with open(path, 'w', newline='') as file:
        writer = csv.writer(file, lineterminator='\n')
        writer.writerow(['sample_id', 'anomaly_label', 'score', 'source_tag'])
        for s in scored:
            writer.writerow([s.sampleId, s.label, _formatFloat(s.score), s.sourceTag])


## Parse a CSV file of scored samples.
def parseScores(filePath):
    scored = []
    with open(filePath, newline='') as file:
        reader = csv.reader(file)

        next(reader)  # Skip header
        for row in reader:
            scored.append(ScoredSample(int(row[0]), int(row[1]), float(row[2]), row[3]))
    return scored
