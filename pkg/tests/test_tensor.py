import unittest

import numpy as np

from gradgate import tensor as T
from gradgate.architecture import ArchSpec
from gradgate.classifier import buildClassifier
from gradgate.data import genGlyphs
from gradgate.errors import ShapeError, DomainError, GraphError
from gradgate.losses import softmaxCrossEntropy


## Central finite-difference gradient of a scalar function.
def numericalGradient(function, x, step=1e-6):
    gradient = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        plus = x.copy()
        minus = x.copy()
        plus[index] += step
        minus[index] -= step
        gradient[index] = (function(plus) - function(minus)) / (2.0 * step)
    return gradient


## Evaluate a graph builder on a value and return (value, analytic gradient).
def evaluate(build, x):
    with T.GradientTape() as tape:
        node = tape.variable(x, name='x')
        root = build(node)
    return float(root.value), T.backward(tape, root)['x']


def scalarValue(build, x):
    with T.GradientTape() as tape:
        return float(build(tape.variable(x)).value)


## Active units of the ReLUs and winners of the max-pools recorded on a tape.
def kinkPattern(tape):
    pattern = []
    for node in tape.nodes:
        if node.operation is None:
            continue
        if node.operation.kind == 'relu':
            pattern.append(node.parents[0].value > 0.0)
        elif node.operation.kind == 'maxpool2d':
            pattern.append(node.cache)
    return pattern


def samePattern(first, second):
    return len(first) == len(second) and all(np.array_equal(a, b) for a, b in zip(first, second))


## Test the tensor operations and the reverse-mode differentiation.
class TestTensor(unittest.TestCase):

    def assertGradient(self, build, x, tolerance=1e-6):
        _, analytic = evaluate(build, x)
        numeric = numericalGradient(lambda v: scalarValue(build, v), x)
        np.testing.assert_allclose(analytic, numeric, rtol=tolerance, atol=tolerance)

    ## Small worked examples of the operations
    def testForwardValues(self):
        with T.GradientTape():
            a = T.add([[1.0, 2.0]], [[3.0, 4.0]])
            self.assertTrue(np.array_equal(a.value, [[4.0, 6.0]]))
            m = T.matmul([[1.0, 2.0]], [[3.0], [4.0]])
            self.assertEqual(m.value[0, 0], 11.0)
            s = T.sigmoid(0.0)
            self.assertEqual(float(s.value), 0.5)
            r = T.relu([-1.0, 0.0, 2.0])
            self.assertTrue(np.array_equal(r.value, [0.0, 0.0, 2.0]))
            p = T.maxpool2d(np.arange(16.0).reshape(1, 1, 4, 4), 2)
            self.assertTrue(np.array_equal(p.value[0, 0], [[5.0, 7.0], [13.0, 15.0]]))
            c = T.conv2d(np.ones((1, 1, 3, 3)), np.ones((1, 1, 2, 2)))
            self.assertTrue(np.array_equal(c.value[0, 0], 4.0 * np.ones((2, 2))))
            padded = T.conv2d(np.ones((1, 1, 3, 3)), np.ones((1, 1, 3, 3)), padding=1)
            self.assertEqual(padded.value.shape, (1, 1, 3, 3))
            self.assertEqual(padded.value[0, 0, 1, 1], 9.0)
            self.assertEqual(padded.value[0, 0, 0, 0], 4.0)
            strided = T.conv2d(np.ones((2, 1, 5, 5)), np.ones((3, 1, 3, 3)), stride=2)
            self.assertEqual(strided.value.shape, (2, 3, 2, 2))
            l = T.logsumexp([[0.0, 0.0]], axis=1)
            self.assertAlmostEqual(float(l.value[0]), np.log(2.0), 12)
            sp = T.softplus(1000.0)
            self.assertEqual(float(sp.value), 1000.0)

    ## Gradient of a simple expression: d/dx sum(x * x) = 2x
    def testSquareGradient(self):
        x = np.array([1.0, -2.0, 3.0])
        value, gradient = evaluate(lambda n: T.reduceSum(T.multiply(n, n)), x)
        self.assertEqual(value, 14.0)
        self.assertTrue(np.array_equal(gradient, 2.0 * x))

    ## Fan-out accumulates gradients
    def testFanOut(self):
        value, gradient = evaluate(lambda n: T.reduceSum(T.add(T.multiply(n, 3.0), T.multiply(n, 2.0))),
                                   np.array([1.0, 2.0]))
        self.assertEqual(value, 15.0)
        self.assertTrue(np.array_equal(gradient, [5.0, 5.0]))

    def testElementwiseFiniteDifferences(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 3))
        self.assertGradient(lambda n: T.reduceSum(T.sigmoid(n)), x)
        self.assertGradient(lambda n: T.reduceSum(T.tanh(n)), x)
        self.assertGradient(lambda n: T.reduceMean(T.softplus(n)), x)
        self.assertGradient(lambda n: T.reduceSum(T.exp(n)), x)
        self.assertGradient(lambda n: T.reduceSum(T.log(T.add(T.multiply(n, n), 1.0))), x)
        self.assertGradient(lambda n: T.reduceSum(T.logsumexp(n, axis=1)), x)
        self.assertGradient(lambda n: T.reduceSum(T.multiply(T.reduceMean(n, axis=0), 2.0)), x)
        self.assertGradient(lambda n: T.reduceSum(T.multiply(T.reshape(n, (3, 2)), np.arange(6.0).reshape(3, 2))), x)

    def testBroadcastFiniteDifferences(self):
        rng = np.random.default_rng(1)
        bias = rng.normal(size=3)
        x = rng.normal(size=(2, 3, 2, 2))
        self.assertGradient(lambda n: T.reduceSum(T.multiply(T.add(x, n), T.add(x, n))), bias)
        self.assertGradient(lambda n: T.reduceSum(T.multiply(T.multiply(x, n), x)), bias)
        self.assertGradient(lambda n: T.reduceSum(T.subtract(1.0, T.multiply(n, n))), bias)

    def testMatMulFiniteDifferences(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(3, 4))
        b = rng.normal(size=(4, 2))
        self.assertGradient(lambda n: T.reduceSum(T.tanh(T.matmul(n, b))), a)
        self.assertGradient(lambda n: T.reduceSum(T.tanh(T.matmul(a, n))), b)

    def testConvolutionFiniteDifferences(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 2, 5, 5))
        kernel = rng.normal(size=(3, 2, 3, 3))
        for stride, padding in ((1, 0), (1, 1), (2, 1)):
            self.assertGradient(lambda n: T.reduceSum(T.tanh(T.conv2d(n, kernel, stride, padding))), x)
            self.assertGradient(lambda n: T.reduceSum(T.tanh(T.conv2d(x, n, stride, padding))), kernel)

    def testMaxPoolFiniteDifferences(self):
        # Distinct values keep the maximum away from ties.
        x = np.random.default_rng(4).permutation(32).reshape(1, 2, 4, 4) * 0.1
        self.assertGradient(lambda n: T.reduceSum(T.multiply(T.maxpool2d(n, 2), T.maxpool2d(n, 2))), x)

    ## Ties in max pooling route the gradient to the first maximal element
    def testMaxPoolTie(self):
        x = np.ones((1, 1, 2, 2))
        _, gradient = evaluate(lambda n: T.reduceSum(T.maxpool2d(n, 2)), x)
        self.assertTrue(np.array_equal(gradient[0, 0], [[1.0, 0.0], [0.0, 0.0]]))

    ## Gradient of clip is zero at and beyond the bounds
    def testClipGradient(self):
        _, gradient = evaluate(lambda n: T.reduceSum(T.clip(n, 0.0, 1.0)), np.array([-0.5, 0.0, 0.5, 1.0, 1.5]))
        self.assertTrue(np.array_equal(gradient, [0.0, 0.0, 1.0, 0.0, 0.0]))

    ## Backward is linear in the root
    def testLinearity(self):
        x = np.array([0.3, -1.2, 2.0])
        _, g1 = evaluate(lambda n: T.reduceSum(T.tanh(n)), x)
        _, g2 = evaluate(lambda n: T.reduceSum(T.sigmoid(n)), x)
        _, combined = evaluate(lambda n: T.add(T.multiply(T.reduceSum(T.tanh(n)), 2.0),
                                               T.multiply(T.reduceSum(T.sigmoid(n)), -3.0)), x)
        np.testing.assert_allclose(combined, 2.0 * g1 - 3.0 * g2, rtol=1e-12, atol=1e-12)

    ## Constants and unreachable variables get no gradient
    def testConstantsAndUnreachable(self):
        with T.GradientTape() as tape:
            x = tape.variable([1.0, 2.0], name='x')
            unused = tape.variable([5.0], name='unused')
            c = tape.constant([3.0, 4.0], name='c')
            root = T.reduceSum(T.multiply(x, c))
        gradients = T.backward(tape, root)
        self.assertTrue(np.array_equal(gradients['x'], [3.0, 4.0]))
        self.assertTrue(np.array_equal(gradients['unused'], [0.0]))
        self.assertNotIn('c', gradients)

    def testGradWrtInput(self):
        with T.GradientTape() as tape:
            x = tape.variable([1.0, 2.0])
            c = tape.constant([1.0, 1.0])
            root = T.reduceSum(T.multiply(T.multiply(x, x), 0.5))
        self.assertTrue(np.array_equal(T.gradWrtInput(tape, root, x), [1.0, 2.0]))
        self.assertRaises(GraphError, T.gradWrtInput, tape, root, c)

    def testErrors(self):
        with T.GradientTape() as tape:
            self.assertRaises(ShapeError, T.add, np.ones((2, 3)), np.ones((3, 2)))
            self.assertRaises(ShapeError, T.matmul, np.ones((2, 3)), np.ones((2, 3)))
            self.assertRaises(ShapeError, T.conv2d, np.ones((1, 2, 4, 4)), np.ones((1, 3, 3, 3)))
            self.assertRaises(DomainError, T.log, [1.0, 0.0])
            self.assertRaises(GraphError, T.forwardOp, 'unknown', [1.0])
            vector = T.multiply(tape.variable([1.0, 2.0]), 2.0)
            self.assertRaises(GraphError, T.backward, tape, vector)
        with T.GradientTape() as other:
            foreign = T.reduceSum(other.variable([1.0]))
        self.assertRaises(GraphError, T.backward, tape, foreign)
        self.assertRaises(GraphError, T.activeTape)

    ## Operation registry
    def testForwardOp(self):
        with T.GradientTape():
            node = T.forwardOp('conv2d', [np.ones((1, 1, 4, 4)), np.ones((2, 1, 3, 3))], stride=1, padding=1)
        self.assertEqual(node.shape, (1, 2, 4, 4))
        self.assertEqual(node.operation.kind, 'conv2d')

    ## Parameter gradients of a random small CNN against central finite differences
    def testSmallCnnParameterGradients(self):
        model = buildClassifier(ArchSpec.smallCnn(), 11)
        data = genGlyphs(4, 0)
        rng = np.random.default_rng(0)
        step = 1e-5

        def loss():
            with T.GradientTape() as tape:
                logits, _ = model.graph(tape, data.images, trainable=True)
                root = softmaxCrossEntropy(logits, data.labels)
            return tape, root

        tape, root = loss()
        gradients = T.backward(tape, root)
        checked = 0
        for _ in range(160):
            p = model.params[rng.integers(len(model.params))]
            index = tuple(rng.integers(d) for d in p.tensor.shape)
            original = p.tensor[index]
            p.tensor[index] = original + step
            plusTape, plus = loss()
            p.tensor[index] = original - step
            minusTape, minus = loss()
            p.tensor[index] = original
            # Skip coordinates whose perturbation switches a ReLU or a max-pool
            if not samePattern(kinkPattern(plusTape), kinkPattern(minusTape)):
                continue
            numeric = (float(plus.value) - float(minus.value)) / (2.0 * step)
            analytic = gradients[p.name][index]
            self.assertLessEqual(abs(analytic - numeric), 1e-4 * abs(numeric) + 1e-8)
            checked += 1
        self.assertGreaterEqual(checked, 100)


if __name__ == '__main__':
    unittest.main()
