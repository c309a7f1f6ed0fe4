##@package data
# Image datasets: procedural glyphs, out-of-distribution sources and seeded splits.

import numpy as np

from .container import writeContainer, readContainer, DATASET_MAGIC
from .errors import DataError, CorruptHeaderError

GLYPH_CLASSES = ('hbar', 'vbar', 'cross', 'x', 'circle', 'square', 'filled', 'diagonal', 'tee', 'ell')
OOD_KINDS = ('uniform-noise', 'gaussian-noise', 'textures')
OOD_LABEL = -1
IMAGE_SIZE = 16


## Images with their labels.
class Dataset:
    ## Constructor.
    # @param images Tensor (count, channels, height, width) with values in [0,1].
    # @param labels Class ids, or -1 for unlabeled (out-of-distribution) samples.
    # @param sourceTag Name of the source of the images.
    # @param seed Seed used to generate the images, None for loaded data.
    def __init__(self, images, labels, sourceTag, seed=None):
        images = np.asarray(images, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        if images.ndim != 4 or len(images) != len(labels):
            raise DataError('Dataset "%s": %s images of shape %s for %s labels.'
                            % (sourceTag, len(images), images.shape[1:], len(labels)))
        if images.size > 0 and (images.min() < 0.0 or images.max() > 1.0):
            raise DataError('Dataset "%s": pixels outside [0,1].' % sourceTag)
        if np.any(labels < OOD_LABEL):
            raise DataError('Dataset "%s": invalid labels.' % sourceTag)
        self.images = images
        self.labels = labels
        self.sourceTag = sourceTag
        self.seed = seed

    def __len__(self):
        return len(self.labels)

    def isLabeled(self):
        return bool(np.all(self.labels >= 0))

    ## Dataset restricted to some indices.
    def subset(self, indices, sourceTag=None):
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices],
                       self.sourceTag if sourceTag is None else sourceTag, self.seed)

    ## Dataset without the samples of some classes.
    def withoutClasses(self, classes, sourceTag=None):
        return self.subset(np.flatnonzero(~np.isin(self.labels, list(classes))), sourceTag)

    ## Dataset with only the samples of some classes.
    def onlyClasses(self, classes, sourceTag=None):
        return self.subset(np.flatnonzero(np.isin(self.labels, list(classes))), sourceTag)

    ## Copy with all labels set to the out-of-distribution sentinel.
    def unlabeled(self, sourceTag=None):
        return Dataset(self.images, np.full(len(self), OOD_LABEL), self.sourceTag if sourceTag is None else sourceTag,
                       self.seed)

    ## @var images
    # Tensor (count, channels, height, width).
    ## @var labels
    # Integer class ids, -1 for out-of-distribution samples.
    ## @var sourceTag
    # Name of the source (e.g. "glyphs", "fgsm", "uniform-noise").


## 12x12 template of a glyph class.
def _glyphTemplate(kind):
    i, j = np.mgrid[0:12, 0:12]
    inside = (i >= 1) & (i <= 10) & (j >= 1) & (j <= 10)
    hbar = (i >= 5) & (i <= 6) & inside
    vbar = (j >= 5) & (j <= 6) & inside
    diagonal = (np.abs(i - j) <= 1) & inside
    if kind == 'hbar':
        mask = hbar
    elif kind == 'vbar':
        mask = vbar
    elif kind == 'cross':
        mask = hbar | vbar
    elif kind == 'x':
        mask = diagonal | ((np.abs(i + j - 11) <= 1) & inside)
    elif kind == 'circle':
        radius = np.sqrt((i - 5.5) ** 2 + (j - 5.5) ** 2)
        mask = np.abs(radius - 4.0) <= 0.8
    elif kind == 'square':
        mask = ((i == 1) | (i == 10) | (j == 1) | (j == 10)) & inside
    elif kind == 'filled':
        mask = (i >= 3) & (i <= 8) & (j >= 3) & (j <= 8)
    elif kind == 'diagonal':
        mask = diagonal
    elif kind == 'tee':
        mask = (((i >= 1) & (i <= 2)) | vbar) & inside
    elif kind == 'ell':
        mask = (((j >= 1) & (j <= 2)) | ((i >= 9) & (i <= 10))) & inside
    else:
        raise DataError('Unknown glyph "%s".' % kind)
    return mask.astype(np.float64)


## Generate the procedural glyph dataset.
# 16x16 grayscale images of ten classes, jittered in position (+-2 px) and intensity (0.7-1.0) with additive
# Gaussian noise (sigma 0.05), clipped to [0,1]. Classes are balanced.
# @param count Number of images.
# @param seed Seed of the generator.
# @return Dataset tagged "glyphs".
def genGlyphs(count, seed):
    if count <= 0:
        raise DataError('The number of glyphs must be positive, got %s.' % count)
    rng = np.random.default_rng(seed)
    templates = [_glyphTemplate(kind) for kind in GLYPH_CLASSES]
    labels = np.arange(count) % len(GLYPH_CLASSES)
    rng.shuffle(labels)

    images = np.zeros((count, 1, IMAGE_SIZE, IMAGE_SIZE))
    for n, label in enumerate(labels):
        shift = rng.integers(-2, 3, size=2)
        intensity = rng.uniform(0.7, 1.0)
        canvas = np.zeros((IMAGE_SIZE, IMAGE_SIZE))
        canvas[2:14, 2:14] = templates[label] * intensity
        canvas = np.roll(canvas, tuple(shift), axis=(0, 1))
        images[n, 0] = np.clip(canvas + rng.normal(0.0, 0.05, size=canvas.shape), 0.0, 1.0)
    return Dataset(images, labels, 'glyphs', seed)


## Checkerboard, linear gradient or oriented stripes.
def _texture(rng):
    i, j = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE].astype(np.float64)
    family = rng.integers(3)
    if family == 0:
        period = rng.integers(2, 5)
        offset = rng.integers(0, period, size=2)
        low, high = rng.uniform(0.0, 0.3), rng.uniform(0.7, 1.0)
        checker = (((i + offset[0]) // period + (j + offset[1]) // period) % 2).astype(bool)
        return np.where(checker, high, low)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    projection = np.cos(angle) * i + np.sin(angle) * j
    if family == 1:
        span = projection.max() - projection.min()
        return (projection - projection.min()) / span
    period = rng.uniform(3.0, 8.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return 0.5 + 0.5 * np.sin(2.0 * np.pi * projection / period + phase)


## Generate out-of-distribution images.
# @param kind "uniform-noise" (iid U[0,1]), "gaussian-noise" (N(0.5, 0.25^2) clipped) or "textures"
# (checkerboards, gradients and stripes).
# @param count Number of images.
# @param seed Seed of the generator.
# @return Dataset with labels -1 tagged with the kind.
def genOod(kind, count, seed):
    if count <= 0:
        raise DataError('The number of images must be positive, got %s.' % count)
    rng = np.random.default_rng(seed)
    shape = (count, 1, IMAGE_SIZE, IMAGE_SIZE)
    if kind == 'uniform-noise':
        images = rng.uniform(0.0, 1.0, size=shape)
    elif kind == 'gaussian-noise':
        images = np.clip(rng.normal(0.5, 0.25, size=shape), 0.0, 1.0)
    elif kind == 'textures':
        images = np.stack([_texture(rng) for _ in range(count)])[:, None]
        images = np.clip(images, 0.0, 1.0)
    else:
        raise DataError('Unknown out-of-distribution kind "%s" (expected one of %s).' % (kind, ', '.join(OOD_KINDS)))
    return Dataset(images, np.full(count, OOD_LABEL), kind, seed)


## Partition indices into parts, stratified by group.
# Each group is permuted with the generator then sliced contiguously at the rounded cumulative fractions.
# @param groups Group of each sample (class ids or any integers).
# @param fractions Fractions of the parts, positive and summing to 1.
# @param rng numpy Generator.
# @return List of sorted index arrays, one per part.
def stratifiedPartition(groups, fractions, rng):
    fractions = np.asarray(fractions, dtype=np.float64)
    if len(fractions) == 0 or np.any(fractions <= 0) or abs(fractions.sum() - 1.0) > 1e-9:
        raise DataError('Invalid split fractions %s.' % list(fractions))
    groups = np.asarray(groups)
    parts = [[] for _ in fractions]
    cumulated = np.cumsum(fractions)
    for group in np.unique(groups):
        members = np.flatnonzero(groups == group)
        members = members[rng.permutation(len(members))]
        cuts = np.rint(cumulated * len(members)).astype(np.int64)
        cuts[-1] = len(members)
        start = 0
        for part, cut in zip(parts, cuts):
            part.extend(members[start:cut])
            start = cut

    result = [np.sort(np.asarray(part, dtype=np.int64)) for part in parts]
    for k, part in enumerate(result):
        if len(part) == 0:
            raise DataError('Split part %s of %s samples with fractions %s is empty.'
                            % (k, len(groups), list(fractions)))
    return result


## Split a dataset, stratified by class for labeled sets.
# @param dataset Dataset.
# @param fractions Fractions of the parts.
# @param seed Seed of the permutation.
# @return List of datasets.
def split(dataset, fractions, seed):
    rng = np.random.default_rng(seed)
    return [dataset.subset(part) for part in stratifiedPartition(dataset.labels, fractions, rng)]


## Persist a dataset in a "GDATA" container.
def saveDataset(dataset, path):
    metadata = {'sourceTag': dataset.sourceTag, 'seed': '' if dataset.seed is None else str(dataset.seed)}
    writeContainer(path, DATASET_MAGIC, metadata,
                   [('images', dataset.images), ('labels', dataset.labels.astype(np.float64))])


## Load a dataset saved by saveDataset.
def loadDataset(path):
    metadata, records = readContainer(path, DATASET_MAGIC)
    tensors = dict(records)
    if 'images' not in tensors or 'labels' not in tensors or 'sourceTag' not in metadata:
        raise CorruptHeaderError('Dataset file "%s" lacks images, labels or source tag.' % path)
    seed = metadata.get('seed', '')
    return Dataset(tensors['images'], tensors['labels'].astype(np.int64), metadata['sourceTag'],
                   int(seed) if seed else None)
