##@package container
# Binary container of named float64 tensors used by checkpoints ("GGATE") and datasets ("GDATA").
#
# Layout: magic, format version (u16), metadata length (u32), UTF-8 "key=value" lines, record count (u32),
# then per record: name length (u16), name, rank (u8), dims (u32 each), little-endian float64 payload.

import hashlib
import struct

import numpy as np

from .errors import BadMagicError, FormatVersionError, CorruptHeaderError, TruncatedFileError

CHECKPOINT_MAGIC = b'GGATE'
DATASET_MAGIC = b'GDATA'
FORMAT_VERSION = 1


## Write a container file.
# @param path Output file path.
# @param magic Magic bytes.
# @param metadata Dictionary of string keys and values.
# @param records List of tuples (name, tensor).
def writeContainer(path, magic, metadata, records):
    lines = []
    for key, value in metadata.items():
        key, value = str(key), str(value)
        if '=' in key or '\n' in key or '\n' in value:
            raise CorruptHeaderError('Invalid metadata entry "%s".' % key)
        lines.append('%s=%s\n' % (key, value))
    header = ''.join(lines).encode('utf-8')

    chunks = [magic, struct.pack('<HI', FORMAT_VERSION, len(header)), header, struct.pack('<I', len(records))]
    for name, tensor in records:
        tensor = np.ascontiguousarray(tensor, dtype='<f8')
        encoded = name.encode('utf-8')
        chunks.append(struct.pack('<H', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<B', tensor.ndim))
        chunks.append(struct.pack('<%sI' % tensor.ndim, *tensor.shape))
        chunks.append(tensor.tobytes())

    with open(path, 'wb') as file:
        file.write(b''.join(chunks))


## Sequential reader raising on truncation.
class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.position = 0

    def take(self, size, what):
        if self.position + size > len(self.blob):
            raise TruncatedFileError('File truncated while reading %s.' % what)
        chunk = self.blob[self.position:self.position + size]
        self.position += size
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


## Read a container file.
# @param path File path.
# @param magic Expected magic bytes.
# @return Tuple (metadata, records) with metadata a dictionary and records a list of (name, tensor).
def readContainer(path, magic):
    with open(path, 'rb') as file:
        reader = _Reader(file.read())

    found = reader.take(len(magic), 'magic')
    if found != magic:
        raise BadMagicError('Bad magic %r in "%s", expected %r.' % (found, path, magic))
    version, headerLength = reader.unpack('<HI', 'header')
    if version != FORMAT_VERSION:
        raise FormatVersionError('Format version %s of "%s" is not supported (expected %s).'
                                 % (version, path, FORMAT_VERSION))

    try:
        text = reader.take(headerLength, 'metadata').decode('utf-8')
    except UnicodeDecodeError:
        raise CorruptHeaderError('Metadata of "%s" is not valid UTF-8.' % path)
    metadata = {}
    for line in text.splitlines():
        if '=' not in line:
            raise CorruptHeaderError('Invalid metadata line "%s" in "%s".' % (line, path))
        key, value = line.split('=', 1)
        metadata[key] = value

    count, = reader.unpack('<I', 'record count')
    records = []
    for r in range(count):
        nameLength, = reader.unpack('<H', 'record %s' % r)
        try:
            name = reader.take(nameLength, 'record %s' % r).decode('utf-8')
        except UnicodeDecodeError:
            raise CorruptHeaderError('Record %s of "%s" has an invalid name.' % (r, path))
        rank, = reader.unpack('<B', name)
        shape = reader.unpack('<%sI' % rank, name)
        size = int(np.prod(shape)) if rank > 0 else 1
        payload = reader.take(8 * size, name)
        records.append((name, np.frombuffer(payload, dtype='<f8').astype(np.float64).reshape(shape)))

    if reader.position != len(reader.blob):
        raise CorruptHeaderError('Trailing data after the last record of "%s".' % path)
    return metadata, records


## SHA-256 digest of a file.
def fileDigest(path):
    with open(path, 'rb') as file:
        return hashlib.sha256(file.read()).hexdigest()


## Lossless text form of a float sequence.
def formatFloats(values):
    return ','.join('%.17g' % v for v in values)


def parseFloats(text):
    return [float(v) for v in text.split(',')] if text else []
