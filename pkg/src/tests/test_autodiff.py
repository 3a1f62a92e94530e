import numpy
import pytest

from npas import exceptions
from npas.core import autodiff

from .gradcheck import max_relative_error


def leaf(rng, *shape):
    return autodiff.Tensor(rng.standard_normal(shape), requires_grad=True)


def test_matmul():

    identity = autodiff.Tensor([[1.0, 0.0], [0.0, 1.0]])
    other = autodiff.Tensor([[3.0, 4.0], [5.0, 6.0]])

    assert autodiff.matmul(identity, other).tolist() == [[3.0, 4.0], [5.0, 6.0]]
    assert autodiff.matmul(autodiff.Tensor([[1.0, 2.0]]), autodiff.Tensor([[3.0], [4.0]])).tolist() == [[11.0]]

    with pytest.raises(exceptions.DimensionError) as error:
        autodiff.matmul(autodiff.Tensor(numpy.ones((2, 3))), autodiff.Tensor(numpy.ones((2, 3))))

    assert "(2, 3)" in str(error.value)

    rng = numpy.random.default_rng(0)
    a, b = leaf(rng, 3, 4), leaf(rng, 4, 2)

    assert max_relative_error(lambda: autodiff.mean(autodiff.matmul(a, b)), [a, b]) <= 1e-6


def test_conv2d():

    ones = autodiff.Tensor(numpy.ones((1, 1, 3, 3)))

    assert autodiff.conv2d(ones, ones).tolist() == [[[[9.0]]]]

    delta = numpy.zeros((1, 1, 3, 3))
    delta[0, 0, 1, 1] = 1.0
    image = numpy.random.default_rng(1).standard_normal((2, 1, 5, 5))

    out = autodiff.conv2d(autodiff.Tensor(image), autodiff.Tensor(delta), padding=1)

    numpy.testing.assert_array_equal(out.data, image)

    with pytest.raises(exceptions.ShapeError):
        autodiff.conv2d(autodiff.Tensor(numpy.ones((1, 1, 4, 4))), ones, stride=2)

    rng = numpy.random.default_rng(2)
    x, kernel = leaf(rng, 2, 2, 5, 5), leaf(rng, 3, 2, 3, 3)
    weights = autodiff.Tensor(rng.standard_normal((2, 3, 3, 3)))

    def loss():
        return autodiff.mean(autodiff.mul(autodiff.conv2d(x, kernel, stride=1, padding=0), weights))

    assert max_relative_error(loss, [x, kernel]) <= 1e-6

    def strided():
        return autodiff.mean(autodiff.relu(autodiff.conv2d(x, kernel, stride=2, padding=1)))

    assert max_relative_error(strided, [x, kernel]) <= 1e-6


def test_weighted_sum():

    templates = [autodiff.Tensor([[1.0, 2.0]]), autodiff.Tensor([[3.0, 4.0]])]

    assert autodiff.weighted_sum(templates, autodiff.Tensor([0.5, 0.5])).tolist() == [[2.0, 3.0]]
    assert autodiff.weighted_sum(templates, autodiff.Tensor([0.0, 1.0])).tolist() == [[3.0, 4.0]]

    with pytest.raises(exceptions.ArgumentError):
        autodiff.weighted_sum([], autodiff.Tensor([1.0]))

    rng = numpy.random.default_rng(3)
    tensors = [leaf(rng, 2, 3) for _ in range(4)]
    alpha = leaf(rng, 4)
    direction = autodiff.Tensor(rng.standard_normal((2, 3)))

    def loss():
        return autodiff.mean(autodiff.mul(autodiff.weighted_sum(tensors, alpha), direction))

    assert max_relative_error(loss, [alpha, *tensors]) <= 1e-6


def test_linear_resize_1d():

    assert autodiff.linear_resize_1d(autodiff.Tensor([0.0, 10.0]), 3).tolist() == [0.0, 5.0, 10.0]
    assert autodiff.linear_resize_1d(autodiff.Tensor([1.0, 2.0, 3.0]), 3).tolist() == [1.0, 2.0, 3.0]
    assert autodiff.linear_resize_1d(autodiff.Tensor([0.0, 10.0]), 5).tolist() == [0.0, 2.5, 5.0, 7.5, 10.0]
    assert autodiff.linear_resize_1d(autodiff.Tensor([7.0]), 4).tolist() == [7.0] * 4
    assert autodiff.linear_resize_1d(autodiff.Tensor([7.0, 1.0]), 1).tolist() == [7.0]

    rng = numpy.random.default_rng(4)
    v = leaf(rng, 7)
    direction = autodiff.Tensor(rng.standard_normal(19))

    assert max_relative_error(lambda: autodiff.mean(autodiff.mul(autodiff.linear_resize_1d(v, 19), direction)), [v]) <= 1e-6


def test_shape_ops():

    rng = numpy.random.default_rng(5)
    a = leaf(rng, 5)
    b = leaf(rng, 3)
    direction = autodiff.Tensor(rng.standard_normal((2, 6)))

    def loss():
        joined = autodiff.concat([autodiff.gather(a, 3, 9), b])
        return autodiff.mean(autodiff.mul(autodiff.reshape(autodiff.gather(joined, 2, 12), (2, 6)), direction))

    assert max_relative_error(loss, [a, b]) <= 1e-6
    assert autodiff.gather(autodiff.Tensor([1.0, 2.0, 3.0]), 2, 4).tolist() == [3.0, 1.0, 2.0, 3.0]

    with pytest.raises(exceptions.ShapeError):
        autodiff.reshape(a, (2, 3))

    with pytest.raises(exceptions.ShapeError):
        autodiff.Tensor(numpy.zeros((0, 3)))


def test_dense_layer_gradients():

    rng = numpy.random.default_rng(6)
    x = autodiff.Tensor(rng.standard_normal((4, 3)))
    weight, bias = leaf(rng, 5, 3), leaf(rng, 5)
    labels = [0, 4, 2, 1]

    def loss():
        hidden = autodiff.relu(autodiff.bias_add(autodiff.matmul(x, autodiff.transpose(weight)), bias))
        return autodiff.softmax_cross_entropy(hidden, labels)

    assert max_relative_error(loss, [weight, bias]) <= 1e-6

    v = leaf(rng, 6)
    direction = autodiff.Tensor(rng.standard_normal(6))

    assert max_relative_error(lambda: autodiff.mean(autodiff.mul(autodiff.softmax(v), direction)), [v]) <= 1e-6


def test_softmax_cross_entropy():

    logits = autodiff.Tensor(numpy.zeros((2, 4)))
    loss = autodiff.softmax_cross_entropy(logits, [1, 3])

    assert loss.item() == pytest.approx(numpy.log(4.0))

    with pytest.raises(exceptions.DimensionError):
        autodiff.softmax_cross_entropy(logits, [1, 2, 3])


def test_backward_needs_tape():

    a = autodiff.Tensor([1.0, 2.0], requires_grad=True)
    loss = autodiff.mean(a)

    with pytest.raises(exceptions.ContractViolationError):
        autodiff.backward(loss)


def test_tape_records_only_tracked_ops():

    a = autodiff.Tensor([1.0, 2.0], requires_grad=True)
    constant = autodiff.Tensor([3.0, 4.0])

    with autodiff.Tape() as tape:
        autodiff.add(constant, constant)
        total = autodiff.mean(autodiff.mul(a, constant))

    assert [node.kind for node in tape.nodes] == ["mul", "mean"]
    assert all(
        node.inputs[0].tape_id is None or node.inputs[0].tape_id < node.output.tape_id
        for node in tape.nodes
    )

    autodiff.backward(total, tape)

    assert a.grad.tolist() == [1.5, 2.0]


def test_tape_replay_is_deterministic():

    def run():

        rng = numpy.random.default_rng(7)
        weight = leaf(rng, 3, 4)
        x = autodiff.Tensor(rng.standard_normal((5, 4)))

        with autodiff.Tape(seed=11) as tape:
            loss = autodiff.softmax_cross_entropy(autodiff.matmul(x, autodiff.transpose(weight)), [0, 1, 2, 0, 1])
            autodiff.backward(loss, tape)

        return loss.item(), weight.grad.copy()

    first, second = run(), run()

    assert first[0] == second[0]
    numpy.testing.assert_array_equal(first[1], second[1])


def test_sgd_step():

    param = autodiff.Tensor([1.0, -2.0], requires_grad=True)
    frozen = autodiff.Tensor([1.0, 1.0], requires_grad=True)
    velocities = {}

    param.grad = numpy.array([0.5, 0.5])
    frozen.grad = numpy.array([1.0, 1.0])

    autodiff.sgd_step([param, frozen], lr=0.1, momentum=0.9, weight_decay=0.1, velocities=velocities, skip_decay=[frozen])

    numpy.testing.assert_allclose(param.data, [1.0 - 0.1 * 0.6, -2.0 - 0.1 * 0.3])
    numpy.testing.assert_allclose(frozen.data, [0.9, 0.9])

    autodiff.sgd_step([param], lr=0.1, momentum=0.9, velocities=velocities)

    numpy.testing.assert_allclose(param.data, [0.94 - 0.1 * (0.9 * 0.6 + 0.5), -2.03 - 0.1 * (0.9 * 0.3 + 0.5)])

    before = param.data.copy()
    autodiff.sgd_step([param], lr=0.0, momentum=0.9, weight_decay=0.1, velocities=velocities)

    numpy.testing.assert_array_equal(param.data, before)

    autodiff.zero_grads([param, frozen])

    assert param.grad is None and frozen.grad is None


def test_backward_is_linear_on_one_tape():

    w = autodiff.Tensor([[1.0, 2.0]], requires_grad=True)
    x = autodiff.Tensor([[3.0], [4.0]])

    with autodiff.Tape() as tape:
        hidden = autodiff.matmul(w, x)
        autodiff.backward(autodiff.mean(hidden), tape)
        autodiff.backward(autodiff.mean(autodiff.scale(hidden, 2.0)), tape)

    assert w.grad.tolist() == [[9.0, 12.0]]

    rng = numpy.random.default_rng(8)
    a, b = leaf(rng, 3, 4), leaf(rng, 4, 2)
    direction = autodiff.Tensor(rng.standard_normal((3, 2)))

    def losses():
        product = autodiff.matmul(a, b)
        return autodiff.mean(autodiff.relu(product)), autodiff.mean(autodiff.mul(product, direction))

    with autodiff.Tape() as tape:
        first, second = losses()
        autodiff.backward(first, tape)
        autodiff.backward(second, tape)

    separate = [a.grad.copy(), b.grad.copy()]
    autodiff.zero_grads([a, b])

    with autodiff.Tape() as tape:
        first, second = losses()
        autodiff.backward(autodiff.add(first, second), tape)

    numpy.testing.assert_allclose(a.grad, separate[0], rtol=1e-12, atol=1e-12)
    numpy.testing.assert_allclose(b.grad, separate[1], rtol=1e-12, atol=1e-12)


def random_matmul(rng):

    m, k, n = rng.integers(1, 5, size=3)
    a, b = leaf(rng, m, k), leaf(rng, k, n)
    direction = autodiff.Tensor(rng.standard_normal((m, n)))

    return lambda: autodiff.mean(autodiff.mul(autodiff.matmul(a, b), direction)), [a, b]


def random_conv2d(rng):

    stride, padding, kh = int(rng.integers(1, 3)), int(rng.integers(0, 2)), int(rng.integers(1, 4))
    size = kh - 2 * padding + stride * int(rng.integers(1, 3))

    while size < 1:
        size += stride

    x = leaf(rng, int(rng.integers(1, 3)), int(rng.integers(1, 3)), size, size)
    kernel = leaf(rng, int(rng.integers(1, 3)), x.shape[1], kh, kh)
    out_size = (size + 2 * padding - kh) // stride + 1
    direction = autodiff.Tensor(rng.standard_normal((x.shape[0], kernel.shape[0], out_size, out_size)))

    return lambda: autodiff.mean(autodiff.mul(autodiff.conv2d(x, kernel, stride=stride, padding=padding), direction)), [x, kernel]


def random_weighted_sum(rng):

    count, shape = int(rng.integers(1, 5)), tuple(rng.integers(1, 4, size=2))
    tensors = [leaf(rng, *shape) for _ in range(count)]
    coeffs = leaf(rng, count)
    direction = autodiff.Tensor(rng.standard_normal(shape))

    return lambda: autodiff.mean(autodiff.mul(autodiff.weighted_sum(tensors, coeffs), direction)), [coeffs, *tensors]


def random_linear_resize_1d(rng):

    v, m = leaf(rng, int(rng.integers(1, 8))), int(rng.integers(1, 20))
    direction = autodiff.Tensor(rng.standard_normal(m))

    return lambda: autodiff.mean(autodiff.mul(autodiff.linear_resize_1d(v, m), direction)), [v]


def random_shape_ops(rng):

    a, b = leaf(rng, int(rng.integers(1, 6))), leaf(rng, int(rng.integers(1, 6)))
    length = int(rng.integers(1, 3)) * 2
    start = int(rng.integers(0, 10))
    direction = autodiff.Tensor(rng.standard_normal((length // 2, 2)))

    def loss():
        joined = autodiff.concat([autodiff.gather(a, start, length), b])
        window = autodiff.reshape(autodiff.gather(joined, 1, length), (2, length // 2))
        return autodiff.mean(autodiff.mul(autodiff.transpose(window), direction))

    return loss, [a, b]


def random_dense_layer(rng):

    n, features, classes = (int(value) for value in rng.integers(1, 5, size=3))
    x = autodiff.Tensor(rng.standard_normal((n, features)))
    weight, bias = leaf(rng, classes + 1, features), leaf(rng, classes + 1)
    labels = rng.integers(0, classes + 1, size=n)

    def loss():
        hidden = autodiff.relu(autodiff.bias_add(autodiff.matmul(x, autodiff.transpose(weight)), bias))
        return autodiff.softmax_cross_entropy(hidden, labels)

    return loss, [weight, bias]


def random_softmax(rng):

    v = leaf(rng, int(rng.integers(1, 7)))
    direction = autodiff.Tensor(rng.standard_normal(v.size))

    return lambda: autodiff.mean(autodiff.mul(autodiff.softmax(v), direction)), [v]


def random_elementwise(rng):

    shape = tuple(rng.integers(1, 4, size=2))
    a, b = leaf(rng, *shape), leaf(rng, *shape)
    factor = float(rng.standard_normal())

    return lambda: autodiff.mean(autodiff.scale(autodiff.mul(autodiff.add(a, b), a), factor)), [a, b]


@pytest.mark.parametrize("build", [
    random_matmul,
    random_conv2d,
    random_weighted_sum,
    random_linear_resize_1d,
    random_shape_ops,
    random_dense_layer,
    random_softmax,
    random_elementwise
])
def test_randomized_gradients(build):

    for trial in range(50):
        loss, params = build(numpy.random.default_rng(1000 + trial))

        assert max_relative_error(loss, params) <= 1e-5, trial


def test_shape_ops_invert():

    for trial in range(50):
        rng = numpy.random.default_rng(trial)
        rows, cols = (int(value) for value in rng.integers(1, 6, size=2))
        a = autodiff.Tensor(rng.standard_normal((rows, cols)))

        numpy.testing.assert_array_equal(autodiff.transpose(autodiff.transpose(a)).data, a.data)
        numpy.testing.assert_array_equal(autodiff.reshape(autodiff.reshape(a, (rows * cols,)), (rows, cols)).data, a.data)
        numpy.testing.assert_array_equal(autodiff.reshape(a, (cols, rows)).data.reshape(-1), a.data.reshape(-1))
