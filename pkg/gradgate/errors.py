##@package errors
# Exceptions raised by gradgate.


## Root of every error raised by the package.
class GradGateError(Exception):
    pass


## Incompatible operand shapes for an operation.
class ShapeError(GradGateError):
    pass


## Value outside the domain of an operation (e.g. log of a non-positive value).
class DomainError(GradGateError):
    pass


## Misuse of a gradient tape or non-finite gradients.
class GraphError(GradGateError):
    pass


## Architecture whose layers do not compose.
class ArchitectureError(GradGateError):
    ## Constructor.
    # @param layerIndex Index of the first offending layer.
    # @param message Description of the problem.
    def __init__(self, layerIndex, message):
        GradGateError.__init__(self, 'Layer %s: %s' % (layerIndex, message))
        self.layerIndex = layerIndex


## Training diverged.
class TrainingError(GradGateError):
    def __init__(self, epoch, batch, message):
        GradGateError.__init__(self, 'Epoch %s, batch %s: %s' % (epoch, batch, message))
        self.epoch = epoch
        self.batch = batch


## Unreadable container file.
class CheckpointError(GradGateError):
    pass


class BadMagicError(CheckpointError):
    pass


class FormatVersionError(CheckpointError):
    pass


class CorruptHeaderError(CheckpointError):
    pass


class TruncatedFileError(CheckpointError):
    pass


## Stored parameter names or shapes disagree with the stored architecture.
class ParamMismatchError(CheckpointError):
    pass


## Unreadable IDX file.
class IdxError(GradGateError):
    pass


class IdxMagicError(IdxError):
    pass


class IdxDimensionError(IdxError):
    pass


class IdxCountError(IdxError):
    pass


## Invalid dataset request or split.
class DataError(GradGateError):
    pass


class AttackError(GradGateError):
    pass


## Label that would not be a confounding label.
class LabelError(GradGateError):
    pass


class DetectorError(GradGateError):
    pass


class ConfigError(GradGateError):
    pass


## An internal consistency gate failed.
class InvariantError(GradGateError):
    pass
