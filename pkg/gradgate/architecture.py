##@package architecture
# Descriptors of the classifier architectures.

from .errors import ArchitectureError

ACTIVATIONS = ('relu', 'none')


## Descriptor of one parametric layer block: convolution or dense, followed by an activation and an optional pooling.
class LayerSpec:
    ## Constructor.
    # @param kind "conv" or "dense".
    # @param units Output channels (conv) or output units (dense).
    # @param kernel Kernel size of a convolution.
    # @param padding Zero padding of a convolution.
    # @param stride Stride of a convolution.
    # @param activation "relu" or "none".
    # @param pool Max pooling window, 1 for no pooling.
    def __init__(self, kind, units, kernel=3, padding=0, stride=1, activation='relu', pool=1):
        self.kind = kind
        self.units = units
        self.kernel = kernel
        self.padding = padding
        self.stride = stride
        self.activation = activation
        self.pool = pool

    def describe(self):
        if self.kind == 'conv':
            return 'conv:%s:k%s:p%s:s%s:%s:pool%s' % (self.units, self.kernel, self.padding, self.stride,
                                                      self.activation, self.pool)
        return 'dense:%s:%s' % (self.units, self.activation)

    ## Parse the output of describe.
    @staticmethod
    def parse(text):
        fields = text.strip().split(':')
        try:
            if fields[0] == 'conv' and len(fields) == 7:
                return LayerSpec('conv', int(fields[1]), kernel=int(fields[2][1:]), padding=int(fields[3][1:]),
                                 stride=int(fields[4][1:]), activation=fields[5], pool=int(fields[6][4:]))
            if fields[0] == 'dense' and len(fields) == 3:
                return LayerSpec('dense', int(fields[1]), activation=fields[2])
        except ValueError:
            pass
        raise ValueError('Invalid layer descriptor "%s".' % text)

    def __eq__(self, other):
        return isinstance(other, LayerSpec) and self.describe() == other.describe()

    def __repr__(self):
        return self.describe()


## Ordered layer descriptors, input shape and class count.
class ArchSpec:
    def __init__(self, layers, inputShape, classes):
        self.layers = list(layers)
        self.inputShape = tuple(int(d) for d in inputShape)
        self.classes = classes

    ## Convolutional network: two 3x3 conv blocks with pooling, a 64-unit dense layer and the output layer.
    @staticmethod
    def smallCnn(inputShape=(1, 16, 16), classes=10):
        return ArchSpec([LayerSpec('conv', 8, kernel=3, padding=1, pool=2),
                         LayerSpec('conv', 16, kernel=3, padding=1, pool=2),
                         LayerSpec('dense', 64),
                         LayerSpec('dense', classes, activation='none')], inputShape, classes)

    ## Fully-connected network with one hidden layer.
    @staticmethod
    def mlp(inputShape=(1, 16, 16), classes=10, hidden=64):
        return ArchSpec([LayerSpec('dense', hidden), LayerSpec('dense', classes, activation='none')],
                        inputShape, classes)

    ## Compute the output shape (without batch dimension) of every layer.
    # @return List of shapes.
    def outputShapes(self):
        if len(self.layers) == 0:
            raise ArchitectureError(0, 'no layers')
        if len(self.inputShape) not in (1, 3) or min(self.inputShape) < 1:
            raise ArchitectureError(0, 'invalid input shape %s' % (self.inputShape,))

        shapes = []
        shape = self.inputShape
        for i, layer in enumerate(self.layers):
            if layer.units < 1:
                raise ArchitectureError(i, 'no units')
            if layer.activation not in ACTIVATIONS:
                raise ArchitectureError(i, 'unknown activation "%s"' % layer.activation)
            if layer.kind == 'conv':
                if len(shape) != 3:
                    raise ArchitectureError(i, 'convolution expects a (channels, height, width) input, got %s'
                                            % (shape,))
                if layer.kernel < 1 or layer.stride < 1 or layer.padding < 0:
                    raise ArchitectureError(i, 'invalid kernel, stride or padding')
                height = (shape[1] + 2 * layer.padding - layer.kernel) // layer.stride + 1
                width = (shape[2] + 2 * layer.padding - layer.kernel) // layer.stride + 1
                if height < 1 or width < 1:
                    raise ArchitectureError(i, 'kernel %s larger than input %s' % (layer.kernel, shape))
                if layer.pool < 1 or layer.pool > min(height, width):
                    raise ArchitectureError(i, 'pooling %s does not fit a %sx%s map' % (layer.pool, height, width))
                shape = (layer.units, height // layer.pool, width // layer.pool)
            elif layer.kind == 'dense':
                if layer.pool != 1:
                    raise ArchitectureError(i, 'dense layers cannot pool')
                shape = (layer.units,)
            else:
                raise ArchitectureError(i, 'unknown layer kind "%s"' % layer.kind)
            shapes.append(shape)

        last = len(self.layers) - 1
        if self.layers[last].kind != 'dense' or shape != (self.classes,):
            raise ArchitectureError(last, 'final layer must be dense with %s outputs' % self.classes)
        return shapes

    ## Names and shapes of the parameter sets in canonical order.
    # @return List of tuples (name, shape, fanIn).
    def paramShapes(self):
        result = []
        shape = self.inputShape
        for i, (layer, outShape) in enumerate(zip(self.layers, self.outputShapes())):
            if layer.kind == 'conv':
                fanIn = shape[0] * layer.kernel * layer.kernel
                weightShape = (layer.units, shape[0], layer.kernel, layer.kernel)
            else:
                fanIn = 1
                for d in shape:
                    fanIn *= d
                weightShape = (fanIn, layer.units)
            result.append(('layer%s.weight' % i, weightShape, fanIn))
            result.append(('layer%s.bias' % i, (layer.units,), fanIn))
            shape = outShape
        return result

    def describe(self):
        return ';'.join(layer.describe() for layer in self.layers)

    ## Rebuild an architecture from its description.
    @staticmethod
    def parse(text, inputShape, classes):
        return ArchSpec([LayerSpec.parse(t) for t in text.split(';')], inputShape, classes)

    def __eq__(self, other):
        return isinstance(other, ArchSpec) and self.describe() == other.describe() \
               and self.inputShape == other.inputShape and self.classes == other.classes

    ## @var layers
    # List of LayerSpec.
    ## @var inputShape
    # Shape of one input without batch dimension, (channels, height, width) or (features,).
    ## @var classes
    # Number of classes N.
