##@package idx_interface
# Reader and writer of the IDX format used by digit datasets.

import struct

import numpy as np

from .data import Dataset
from .errors import IdxMagicError, IdxDimensionError, IdxCountError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


## Read an unsigned byte IDX file.
# @param filePath Path of the file.
# @param magic Expected magic number.
# @param rank Expected number of dimensions.
# @return numpy uint8 array.
def _parseIdx(filePath, magic, rank):
    with open(filePath, 'rb') as file:
        blob = file.read()
    if len(blob) < 4:
        raise IdxMagicError('File "%s" is too short to be an IDX file.' % filePath)
    found, = struct.unpack('>I', blob[:4])
    if found != magic:
        raise IdxMagicError('Bad magic 0x%08x in "%s", expected 0x%08x.' % (found, filePath, magic))

    if len(blob) < 4 + 4 * rank:
        raise IdxDimensionError('File "%s" is truncated in its dimensions.' % filePath)
    shape = struct.unpack('>%sI' % rank, blob[4:4 + 4 * rank])
    payload = blob[4 + 4 * rank:]
    expected = int(np.prod(shape))
    if len(payload) != expected:
        raise IdxDimensionError('File "%s" declares dimensions %s (%s bytes) but holds %s bytes.'
                                % (filePath, shape, expected, len(payload)))
    return np.frombuffer(payload, dtype=np.uint8).reshape(shape)


## Parse an IDX image file and its label file.
# Pixels are scaled from [0,255] to [0,1].
# @param imagesPath Path of the images file (magic 0x00000803).
# @param labelsPath Path of the labels file (magic 0x00000801).
# @return Dataset tagged "idx".
def loadIdx(imagesPath, labelsPath):
    images = _parseIdx(imagesPath, IMAGES_MAGIC, 3)
    labels = _parseIdx(labelsPath, LABELS_MAGIC, 1)
    if len(images) != len(labels):
        raise IdxCountError('"%s" holds %s images but "%s" holds %s labels.'
                            % (imagesPath, len(images), labelsPath, len(labels)))
    return Dataset(images[:, None].astype(np.float64) / 255.0, labels.astype(np.int64), 'idx')


## Write images and labels as IDX files.
# @param images Array (count, height, width) or (count, 1, height, width) with values in [0,1] or [0,255] uint8.
# @param labels Class ids in [0,255].
# @param imagesPath Output path of the images.
# @param labelsPath Output path of the labels.
def writeIdx(images, labels, imagesPath, labelsPath):
    images = np.asarray(images)
    if images.ndim == 4:
        images = images[:, 0]
    if images.dtype != np.uint8:
        images = np.rint(np.clip(images, 0.0, 1.0) * 255.0).astype(np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)

    with open(imagesPath, 'wb') as file:
        file.write(struct.pack('>4I', IMAGES_MAGIC, *images.shape))
        file.write(images.tobytes())
    with open(labelsPath, 'wb') as file:
        file.write(struct.pack('>2I', LABELS_MAGIC, len(labels)))
        file.write(labels.tobytes())
