##@package tensor
# Dense float64 tensors with reverse-mode automatic differentiation.
#
# Tensors are numpy float64 arrays. Operations executed while a GradientTape is active are recorded as
# Nodes in creation order, which is a topological order of the computation graph.

import threading
from abc import ABCMeta, abstractmethod

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from .errors import ShapeError, DomainError, GraphError

_local = threading.local()


## Convert a value to a float64 tensor.
# @param value Array-like value.
# @return numpy float64 array.
def asTensor(value):
    return np.array(value, dtype=np.float64)


## Node of a computation graph.
class Node:
    def __init__(self, value, parents=(), operation=None, attributes=None, cache=None, requiresGrad=False,
                 name=None):
        self.value = value
        self.parents = tuple(parents)
        self.operation = operation
        self.attributes = attributes if attributes is not None else {}
        self.cache = cache
        self.requiresGrad = requiresGrad
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        kind = self.operation.kind if self.operation is not None else 'leaf'
        return 'Node(%s, shape=%s%s)' % (kind, self.value.shape, ', name=%s' % self.name if self.name else '')

    ## @var value
    # Tensor held by the node.
    ## @var parents
    # Input nodes of the operation which produced this node.
    ## @var operation
    # Operation producing the node, None for leaves.
    ## @var requiresGrad
    # True if gradients flow to this node.


## Records the nodes of one computation.
# Use as a context manager: operations issued inside the block are recorded on this tape. Tapes are
# thread-local, distinct threads may record distinct tapes concurrently.
class GradientTape:
    def __init__(self):
        self.nodes = []
        self.gradients = {}
        self.root = None
        self._positions = {}

    def __enter__(self):
        stack = getattr(_local, 'tapes', None)
        if stack is None:
            stack = []
            _local.tapes = stack
        stack.append(self)
        return self

    def __exit__(self, excType, excValue, traceback):
        _local.tapes.pop()
        return False

    ## Record a trainable leaf.
    # @param value Tensor value.
    # @param name Optional name, used as key of the gradients returned by backward.
    # @return Node.
    def variable(self, value, name=None):
        return self.record(Node(asTensor(value), requiresGrad=True, name=name))

    ## Record a leaf which never receives gradient.
    def constant(self, value, name=None):
        return self.record(Node(asTensor(value), requiresGrad=False, name=name))

    def record(self, node):
        self._positions[node] = len(self.nodes)
        self.nodes.append(node)
        return node

    ## Check whether a node has been recorded on this tape.
    def holds(self, node):
        return node in self._positions

    ## Turn an input of an operation into a node of this tape.
    def lift(self, value):
        if isinstance(value, Node):
            if not self.holds(value):
                raise GraphError('Node %s is not recorded on the active tape.' % repr(value))
            return value
        return self.constant(value)

    ## @var nodes
    # Recorded nodes in topological order.
    ## @var gradients
    # Dictionary node/accumulated gradient filled by backward.
    ## @var root
    # Root of the last backward pass.


## Get the tape of the current thread.
# @return Innermost active GradientTape.
def activeTape():
    stack = getattr(_local, 'tapes', None)
    if not stack:
        raise GraphError('No active gradient tape.')
    return stack[-1]


## Abstract differentiable operation.
class Operation(metaclass=ABCMeta):
    kind = None

    ## Compute the value of the operation.
    # @param values Input tensors.
    # @param attributes Dictionary of attributes.
    # @return Tuple (value, cache), the cache being handed back to backward.
    @abstractmethod
    def forward(self, values, attributes):
        return None

    ## Vector-Jacobian product.
    # @param gradient Gradient with respect to the output.
    # @param values Input tensors.
    # @param value Output tensor.
    # @param cache Cache returned by forward.
    # @param attributes Dictionary of attributes.
    # @return List with one gradient (or None) per input.
    @abstractmethod
    def backward(self, gradient, values, value, cache, attributes):
        return None

    def _shapeError(self, shapes, detail):
        return ShapeError('%s: %s (shapes %s)' % (self.kind, detail, ', '.join(str(s) for s in shapes)))


## Broadcast mode between two operands: equal shapes, scalar second operand, or a 1-D operand along axis 1.
def _broadcastMode(operation, a, b):
    if a.shape == b.shape:
        return 'same'
    if b.ndim == 0:
        return 'scalar'
    if a.ndim == 0:
        return 'scalarLeft'
    if b.ndim == 1 and a.ndim >= 2 and a.shape[1] == b.shape[0]:
        return 'channel'
    raise operation._shapeError([a.shape, b.shape], 'incompatible operands')


def _expand(b, a, mode):
    if mode == 'channel':
        return b.reshape((1, -1) + (1,) * (a.ndim - 2))
    return b


def _reduceTo(gradient, shape, mode):
    if mode == 'same':
        return gradient
    if mode in ('scalar', 'scalarLeft'):
        return np.asarray(gradient.sum()).reshape(shape)
    axes = tuple(i for i in range(gradient.ndim) if i != 1)
    return gradient.sum(axis=axes)


class Add(Operation):
    kind = 'add'

    def forward(self, values, attributes):
        a, b = values
        mode = _broadcastMode(self, a, b)
        return a + _expand(b, a, mode), mode

    def backward(self, gradient, values, value, mode, attributes):
        a, b = values
        if mode == 'scalarLeft':
            return [_reduceTo(gradient, a.shape, mode), gradient]
        return [gradient, _reduceTo(gradient, b.shape, mode)]


class Subtract(Operation):
    kind = 'subtract'

    def forward(self, values, attributes):
        a, b = values
        mode = _broadcastMode(self, a, b)
        return a - _expand(b, a, mode), mode

    def backward(self, gradient, values, value, mode, attributes):
        a, b = values
        if mode == 'scalarLeft':
            return [_reduceTo(gradient, a.shape, mode), -gradient]
        return [gradient, _reduceTo(-gradient, b.shape, mode)]


class Multiply(Operation):
    kind = 'multiply'

    def forward(self, values, attributes):
        a, b = values
        mode = _broadcastMode(self, a, b)
        return a * _expand(b, a, mode), mode

    def backward(self, gradient, values, value, mode, attributes):
        a, b = values
        if mode == 'scalarLeft':
            return [_reduceTo(gradient * b, a.shape, mode), gradient * a]
        return [gradient * _expand(b, a, mode), _reduceTo(gradient * a, b.shape, mode)]


class MatMul(Operation):
    kind = 'matmul'

    def forward(self, values, attributes):
        a, b = values
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise self._shapeError([a.shape, b.shape], 'expected (m, k) and (k, n) matrices')
        return a @ b, None

    def backward(self, gradient, values, value, cache, attributes):
        a, b = values
        return [gradient @ b.T, a.T @ gradient]


## 2-D cross-correlation of a (batch, channels, height, width) input with an (out, channels, kh, kw) kernel.
class Conv2d(Operation):
    kind = 'conv2d'

    def forward(self, values, attributes):
        x, kernel = values
        stride = attributes.get('stride', 1)
        padding = attributes.get('padding', 0)
        if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1]:
            raise self._shapeError([x.shape, kernel.shape], 'expected (B, C, H, W) input and (O, C, kh, kw) kernel')
        if stride < 1 or padding < 0:
            raise self._shapeError([x.shape, kernel.shape], 'invalid stride %s or padding %s' % (stride, padding))
        kh, kw = kernel.shape[2:]
        height = x.shape[2] + 2 * padding
        width = x.shape[3] + 2 * padding
        if height < kh or width < kw:
            raise self._shapeError([x.shape, kernel.shape], 'kernel larger than padded input')

        padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding > 0 else x
        windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        out = np.tensordot(windows, kernel, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        return np.ascontiguousarray(out), (windows, padded.shape)

    def backward(self, gradient, values, value, cache, attributes):
        x, kernel = values
        windows, paddedShape = cache
        stride = attributes.get('stride', 1)
        padding = attributes.get('padding', 0)
        kh, kw = kernel.shape[2:]
        outH, outW = gradient.shape[2:]

        gradKernel = np.tensordot(gradient, windows, axes=([0, 2, 3], [0, 2, 3]))

        gradPadded = np.zeros(paddedShape)
        for i in range(kh):
            for j in range(kw):
                contribution = np.tensordot(gradient, kernel[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
                gradPadded[:, :, i:i + stride * (outH - 1) + 1:stride, j:j + stride * (outW - 1) + 1:stride] += \
                    contribution
        if padding > 0:
            gradPadded = gradPadded[:, :, padding:-padding, padding:-padding]
        return [gradPadded, gradKernel]


## Non-overlapping max pooling; ties go to the first maximal element of the window.
class MaxPool2d(Operation):
    kind = 'maxpool2d'

    def forward(self, values, attributes):
        x, = values
        size = attributes.get('size', 2)
        if x.ndim != 4 or size < 1 or x.shape[2] < size or x.shape[3] < size:
            raise self._shapeError([x.shape], 'cannot pool with window %s' % size)
        batch, channels, height, width = x.shape
        outH, outW = height // size, width // size
        blocks = x[:, :, :outH * size, :outW * size].reshape(batch, channels, outH, size, outW, size)
        blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(batch, channels, outH, outW, size * size)
        argmax = np.argmax(blocks, axis=-1)
        out = np.take_along_axis(blocks, argmax[..., None], axis=-1)[..., 0]
        return out, argmax

    def backward(self, gradient, values, value, argmax, attributes):
        x, = values
        size = attributes.get('size', 2)
        batch, channels, outH, outW = gradient.shape
        blocks = np.zeros((batch, channels, outH, outW, size * size))
        np.put_along_axis(blocks, argmax[..., None], gradient[..., None], axis=-1)
        blocks = blocks.reshape(batch, channels, outH, outW, size, size).transpose(0, 1, 2, 4, 3, 5)
        result = np.zeros(x.shape)
        result[:, :, :outH * size, :outW * size] = blocks.reshape(batch, channels, outH * size, outW * size)
        return [result]


class Relu(Operation):
    kind = 'relu'

    def forward(self, values, attributes):
        x, = values
        return np.maximum(x, 0.0), None

    def backward(self, gradient, values, value, cache, attributes):
        return [gradient * (values[0] > 0.0)]


class Sigmoid(Operation):
    kind = 'sigmoid'

    def forward(self, values, attributes):
        return special.expit(values[0]), None

    def backward(self, gradient, values, value, cache, attributes):
        return [gradient * value * (1.0 - value)]


class Log(Operation):
    kind = 'log'

    def forward(self, values, attributes):
        x, = values
        if np.any(x <= 0.0):
            raise DomainError('log: non-positive input')
        return np.log(x), None

    def backward(self, gradient, values, value, cache, attributes):
        return [gradient / values[0]]


## Exponential; saturates to +inf for inputs above ~709.
class Exp(Operation):
    kind = 'exp'

    def forward(self, values, attributes):
        return np.exp(values[0]), None

    def backward(self, gradient, values, value, cache, attributes):
        return [gradient * value]


class Tanh(Operation):
    kind = 'tanh'

    def forward(self, values, attributes):
        return np.tanh(values[0]), None

    def backward(self, gradient, values, value, cache, attributes):
        return [gradient * (1.0 - value * value)]


## log(1 + exp(x)), stable for any finite x.
class Softplus(Operation):
    kind = 'softplus'

    def forward(self, values, attributes):
        return np.logaddexp(0.0, values[0]), None

    def backward(self, gradient, values, value, cache, attributes):
        return [gradient * special.expit(values[0])]


class LogSumExp(Operation):
    kind = 'logsumexp'

    def forward(self, values, attributes):
        x, = values
        axis = attributes.get('axis', -1)
        return special.logsumexp(x, axis=axis), None

    def backward(self, gradient, values, value, cache, attributes):
        axis = attributes.get('axis', -1)
        return [np.expand_dims(gradient, axis) * special.softmax(values[0], axis=axis)]


def _normalizeAxes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


class Sum(Operation):
    kind = 'sum'

    def forward(self, values, attributes):
        x, = values
        axes = _normalizeAxes(attributes.get('axis'), x.ndim)
        return np.asarray(x.sum(axis=axes)), axes

    def backward(self, gradient, values, value, axes, attributes):
        x, = values
        return [np.broadcast_to(np.expand_dims(gradient, axes), x.shape).copy()]


class Mean(Operation):
    kind = 'mean'

    def forward(self, values, attributes):
        x, = values
        axes = _normalizeAxes(attributes.get('axis'), x.ndim)
        count = int(np.prod([x.shape[a] for a in axes]))
        return np.asarray(x.sum(axis=axes) / count), (axes, count)

    def backward(self, gradient, values, value, cache, attributes):
        x, = values
        axes, count = cache
        return [np.broadcast_to(np.expand_dims(gradient / count, axes), x.shape).copy()]


class Reshape(Operation):
    kind = 'reshape'

    def forward(self, values, attributes):
        x, = values
        try:
            return x.reshape(attributes['shape']), None
        except ValueError:
            raise self._shapeError([x.shape], 'cannot reshape to %s' % (attributes['shape'],))

    def backward(self, gradient, values, value, cache, attributes):
        return [gradient.reshape(values[0].shape)]


## Clip to [low, high]; gradient passes strictly inside the interval only.
class Clip(Operation):
    kind = 'clip'

    def forward(self, values, attributes):
        return np.clip(values[0], attributes['low'], attributes['high']), None

    def backward(self, gradient, values, value, cache, attributes):
        x, = values
        return [gradient * ((x > attributes['low']) & (x < attributes['high']))]


OPERATIONS = {op.kind: op for op in (Add(), Subtract(), Multiply(), MatMul(), Conv2d(), MaxPool2d(), Relu(),
                                     Sigmoid(), Log(), Exp(), Tanh(), Softplus(), LogSumExp(), Sum(), Mean(),
                                     Reshape(), Clip())}


## Execute an operation and record it on the active tape.
# @param opKind Name of the operation (add, multiply, matmul, conv2d, relu, maxpool2d, ...).
# @param inputs Nodes or array-like values, the latter being recorded as constants.
# @param attributes Attributes of the operation (stride, padding, axis, ...).
# @return Node holding the result.
def forwardOp(opKind, inputs, **attributes):
    operation = OPERATIONS.get(opKind)
    if operation is None:
        raise GraphError('Unknown operation "%s".' % opKind)
    tape = activeTape()
    nodes = [tape.lift(i) for i in inputs]
    value, cache = operation.forward([n.value for n in nodes], attributes)
    node = Node(value, nodes, operation, attributes, cache, requiresGrad=any(n.requiresGrad for n in nodes))
    return tape.record(node)


def add(a, b):
    return forwardOp('add', [a, b])


def subtract(a, b):
    return forwardOp('subtract', [a, b])


def multiply(a, b):
    return forwardOp('multiply', [a, b])


def matmul(a, b):
    return forwardOp('matmul', [a, b])


def conv2d(x, kernel, stride=1, padding=0):
    return forwardOp('conv2d', [x, kernel], stride=stride, padding=padding)


def maxpool2d(x, size=2):
    return forwardOp('maxpool2d', [x], size=size)


def relu(x):
    return forwardOp('relu', [x])


def sigmoid(x):
    return forwardOp('sigmoid', [x])


def log(x):
    return forwardOp('log', [x])


def exp(x):
    return forwardOp('exp', [x])


def tanh(x):
    return forwardOp('tanh', [x])


def softplus(x):
    return forwardOp('softplus', [x])


def logsumexp(x, axis=-1):
    return forwardOp('logsumexp', [x], axis=axis)


def reduceSum(x, axis=None):
    return forwardOp('sum', [x], axis=axis)


def reduceMean(x, axis=None):
    return forwardOp('mean', [x], axis=axis)


def reshape(x, shape):
    return forwardOp('reshape', [x], shape=tuple(shape))


def clip(x, low, high):
    return forwardOp('clip', [x], low=low, high=high)


## Backpropagate from a scalar root.
# Gradients accumulate additively over fan-out; nodes which do not require gradients are skipped.
# @param tape Tape which recorded the computation of the root.
# @param root Scalar node.
# @return Dictionary name/gradient for every named node requiring gradients.
def backward(tape, root):
    if root.value.size != 1:
        raise GraphError('Backward requires a scalar root, got shape %s.' % (root.value.shape,))
    if not tape.holds(root):
        raise GraphError('Root is not recorded on the tape.')

    gradients = {root: np.ones_like(root.value)}
    for node in reversed(tape.nodes[:tape._positions[root] + 1]):
        gradient = gradients.get(node)
        if gradient is None or node.operation is None:
            continue
        inputGradients = node.operation.backward(gradient, [p.value for p in node.parents], node.value, node.cache,
                                                 node.attributes)
        for parent, parentGradient in zip(node.parents, inputGradients):
            if parentGradient is None or not parent.requiresGrad:
                continue
            if parent in gradients:
                gradients[parent] = gradients[parent] + parentGradient
            else:
                gradients[parent] = parentGradient

    tape.gradients = gradients
    tape.root = root
    return {node.name: gradients.get(node, np.zeros_like(node.value))
            for node in tape.nodes if node.name is not None and node.requiresGrad}


## Gradient of a scalar root with respect to one of its inputs.
# @param tape Tape which recorded the computation.
# @param root Scalar node.
# @param input Leaf recorded with GradientTape.variable.
# @return Tensor with the shape of the input.
def gradWrtInput(tape, root, input):
    if not tape.holds(input):
        raise GraphError('Input is not recorded on the tape.')
    if not input.requiresGrad:
        raise GraphError('Input was recorded as a constant.')
    if tape.root is not root:
        backward(tape, root)
    return tape.gradients.get(input, np.zeros_like(input.value))
