"""
    Reverse-mode differentiation over float64 numpy arrays.

    Operations record themselves on the active Tape (define-by-run). Outside a
    tape they only compute values, which is how evaluation and materialization
    run.

        >>> from npas.core import autodiff
        >>>
        >>> w = autodiff.Tensor([[1.0, 2.0]], requires_grad=True)
        >>> x = autodiff.Tensor([[3.0], [4.0]])
        >>>
        >>> with autodiff.Tape(seed=0):
        ...     loss = autodiff.mean(autodiff.matmul(w, x))
        ...     autodiff.backward(loss)
        >>> w.grad
        array([[3., 4.]])
"""
import threading
import typing

import numpy

from .. import exceptions


_local = threading.local()


def _tape_stack() -> list:

    if not hasattr(_local, "stack"):
        _local.stack = []

    return _local.stack


def active_tape() -> typing.Optional["Tape"]:

    stack = _tape_stack()

    return stack[-1] if stack else None


class Tensor:
    """
    Dense float64 array with an optional gradient slot.

    Parameters:

        data (array-like):
            Values, copied into a contiguous float64 buffer.

        requires_grad (bool | optional):
            Pass True for trainable leaves. Defaults to False.

        name (str | optional):
            Label used in checkpoints and error messages.
    """

    def __init__(
        self,
        data: typing.Any,
        requires_grad: typing.Optional[bool] = False,
        name: typing.Optional[str] = None
    ):
        self.data = numpy.array(data, dtype=numpy.float64)

        if any(extent < 1 for extent in self.data.shape):
            raise exceptions.ShapeError(
                message="Tensor extents must be positive",
                subject=self.data.shape
            )

        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self.tape_id = None


    @property
    def shape(self) -> typing.Tuple[int, ...]:
        return self.data.shape


    @property
    def size(self) -> int:
        return self.data.size


    @property
    def ndim(self) -> int:
        return self.data.ndim


    def numpy(self) -> numpy.ndarray:
        return self.data


    def tolist(self) -> list:
        return self.data.tolist()


    def item(self) -> float:
        return float(self.data.reshape(-1)[0])


    def __add__(self, other):
        return add(self, other)


    def __mul__(self, other):
        return mul(self, other)


    def __matmul__(self, other):
        return matmul(self, other)


    def __repr__(self):

        name = f", name={self.name!r}" if self.name else ""

        return f"Tensor(shape={self.shape}{name}, requires_grad={self.requires_grad})"


class Node:


    def __init__(
        self,
        kind: str,
        inputs: typing.Tuple[Tensor, ...],
        output: Tensor,
        backward: typing.Callable,
        saved: typing.Optional[dict] = None
    ):
        self.kind = kind
        self.inputs = inputs
        self.output = output
        self.backward = backward
        self.saved = saved or {}


class Tape:
    """
    Ordered record of the operations of one forward pass.

    Nodes are appended as operations run, so every node's inputs precede it.
    The tape is rebuilt every optimization step.
    """

    def __init__(self, seed: typing.Optional[int] = 0):
        self.seed = seed
        self.nodes = []


    def __enter__(self):

        _tape_stack().append(self)

        return self


    def __exit__(self, *args):
        _tape_stack().remove(self)


    def record(self, node: Node) -> None:

        node.output.tape_id = len(self.nodes)
        self.nodes.append(node)


    def backward(self, loss: Tensor) -> None:
        """
        Propagate d(loss) through the recorded nodes and add the result to
        .grad of the leaves. Intermediate gradients live only for this call,
        so repeated calls on one tape add up linearly.
        """

        produced = {id(node.output) for node in self.nodes}
        grads = {id(loss): numpy.ones_like(loss.data)}

        for node in reversed(self.nodes):
            upstream = grads.pop(id(node.output), None)

            if upstream is None:
                continue

            for tensor, grad in zip(node.inputs, node.backward(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue

                key = id(tensor)
                grads[key] = numpy.array(grad, dtype=numpy.float64) if key not in grads else grads[key] + grad

        leaves = {}

        for node in self.nodes:
            for tensor in node.inputs:
                if tensor.requires_grad and id(tensor) not in produced:
                    leaves[id(tensor)] = tensor

        if loss.requires_grad and id(loss) not in produced:
            leaves[id(loss)] = loss

        for key, tensor in leaves.items():
            if key in grads:
                tensor.grad = grads[key] if tensor.grad is None else tensor.grad + grads[key]


def _wrap(value: typing.Any) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _emit(
    kind: str,
    inputs: typing.Sequence[Tensor],
    data: numpy.ndarray,
    backward: typing.Callable,
    saved: typing.Optional[dict] = None
) -> Tensor:

    output = Tensor.__new__(Tensor)
    output.data = data
    output.grad = None
    output.name = None
    output.tape_id = None
    output.requires_grad = False

    tape = active_tape()

    if tape is not None and any(tensor.requires_grad for tensor in inputs):
        output.requires_grad = True
        tape.record(Node(kind, tuple(inputs), output, backward, saved))

    return output


def _same_shape(kind: str, a: Tensor, b: Tensor) -> None:

    if a.shape != b.shape:
        raise exceptions.DimensionError(
            message=f"{kind}: shapes {a.shape} and {b.shape} do not agree",
            subject=kind
        )


def add(a: Tensor, b: Tensor) -> Tensor:

    a, b = _wrap(a), _wrap(b)
    _same_shape("add", a, b)

    return _emit("add", (a, b), a.data + b.data, lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:

    a, b = _wrap(a), _wrap(b)
    _same_shape("mul", a, b)

    return _emit("mul", (a, b), a.data * b.data, lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, factor: float) -> Tensor:
    return _emit("scale", (a,), a.data * factor, lambda g: (g * factor,))


def relu(a: Tensor) -> Tensor:

    positive = a.data > 0

    return _emit("relu", (a,), numpy.where(positive, a.data, 0.0), lambda g: (g * positive,))


def bias_add(x: Tensor, bias: Tensor) -> Tensor:
    """
    Add a per-feature bias along axis 1 (features of dense outputs, channels of
    convolution outputs).
    """

    if bias.ndim != 1 or x.ndim < 2 or x.shape[1] != bias.shape[0]:
        raise exceptions.DimensionError(
            message=f"bias_add: bias {bias.shape} does not match input {x.shape}",
            subject="bias_add"
        )

    view = (1, bias.shape[0]) + (1,) * (x.ndim - 2)
    axes = tuple(axis for axis in range(x.ndim) if axis != 1)

    return _emit(
        "bias_add",
        (x, bias),
        x.data + bias.data.reshape(view),
        lambda g: (g, g.sum(axis=axes))
    )


def reshape(a: Tensor, shape: typing.Sequence[int]) -> Tensor:

    shape = tuple(int(extent) for extent in shape)

    if int(numpy.prod(shape)) != a.size:
        raise exceptions.ShapeError(
            message=f"reshape: cannot view {a.shape} as {shape}",
            subject="reshape"
        )

    original = a.shape

    return _emit("reshape", (a,), a.data.reshape(shape), lambda g: (g.reshape(original),))


def transpose(a: Tensor) -> Tensor:

    if a.ndim != 2:
        raise exceptions.DimensionError(
            message=f"transpose: expected a matrix, got {a.shape}",
            subject="transpose"
        )

    return _emit("transpose", (a,), a.data.T.copy(), lambda g: (g.T,))


def gather(a: Tensor, start: int, length: int) -> Tensor:
    """
    Contiguous range of a 1-D tensor with modular (wrap-around) indexing.
    """

    if a.ndim != 1:
        raise exceptions.DimensionError(
            message=f"gather: expected a vector, got {a.shape}",
            subject="gather"
        )

    indices = (start + numpy.arange(length)) % a.size

    def backward(g):

        grad = numpy.zeros_like(a.data)
        numpy.add.at(grad, indices, g)

        return (grad,)

    return _emit("gather", (a,), a.data[indices], backward, {"indices": indices})


def concat(tensors: typing.Sequence[Tensor]) -> Tensor:

    if not tensors:
        raise exceptions.ArgumentError(message="concat: empty tensor list")

    if any(tensor.ndim != 1 for tensor in tensors):
        raise exceptions.DimensionError(
            message="concat: only vectors can be concatenated",
            subject=[tensor.shape for tensor in tensors]
        )

    boundaries = numpy.cumsum([tensor.size for tensor in tensors])[:-1]

    return _emit(
        "concat",
        tuple(tensors),
        numpy.concatenate([tensor.data for tensor in tensors]),
        lambda g: tuple(numpy.split(g, boundaries))
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:

    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise exceptions.DimensionError(
            message=f"matmul: shapes {a.shape} and {b.shape} are not aligned",
            subject="matmul"
        )

    return _emit(
        "matmul",
        (a, b),
        a.data @ b.data,
        lambda g: (g @ b.data.T, a.data.T @ g)
    )


def conv2d(
    x: Tensor,
    kernel: Tensor,
    stride: typing.Optional[int] = 1,
    padding: typing.Optional[int] = 0
) -> Tensor:
    """
    Direct cross-correlation of an N×C×H×W input with an F×C×kh×kw kernel.

    The kernel is applied one tap at a time over strided views of the padded
    input; there is no im2col or FFT lowering.
    """

    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1]:
        raise exceptions.DimensionError(
            message=f"conv2d: input {x.shape} and kernel {kernel.shape} are not compatible",
            subject="conv2d"
        )

    n, c, h, w = x.shape
    f, _, kh, kw = kernel.shape

    span_h, span_w = h + 2 * padding - kh, w + 2 * padding - kw

    if span_h < 0 or span_w < 0 or span_h % stride or span_w % stride:
        raise exceptions.ShapeError(
            message=f"conv2d: kernel {kh}x{kw} with stride {stride} and padding {padding} "
                    f"does not tile a {h}x{w} input",
            subject="conv2d"
        )

    out_h, out_w = span_h // stride + 1, span_w // stride + 1

    padded = numpy.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))

    def window(u: int, v: int) -> typing.Tuple[slice, slice, slice, slice]:
        return (
            slice(None),
            slice(None),
            slice(u, u + stride * (out_h - 1) + 1, stride),
            slice(v, v + stride * (out_w - 1) + 1, stride)
        )

    out = numpy.zeros((n, f, out_h, out_w))

    for u in range(kh):
        for v in range(kw):
            out += numpy.einsum("nchw,fc->nfhw", padded[window(u, v)], kernel.data[:, :, u, v])

    def backward(g):

        grad_padded = numpy.zeros_like(padded)
        grad_kernel = numpy.zeros_like(kernel.data)

        for u in range(kh):
            for v in range(kw):
                grad_kernel[:, :, u, v] = numpy.einsum("nfhw,nchw->fc", g, padded[window(u, v)])
                grad_padded[window(u, v)] += numpy.einsum("nfhw,fc->nchw", g, kernel.data[:, :, u, v])

        grad_x = grad_padded[:, :, padding:padding + h, padding:padding + w]

        return (grad_x, grad_kernel)

    return _emit("conv2d", (x, kernel), out, backward, {"stride": stride, "padding": padding})


def weighted_sum(tensors: typing.Sequence[Tensor], coeffs: Tensor) -> Tensor:
    """
    Elementwise sum of coeffs[k] * tensors[k], accumulated in index order.
    """

    if not tensors:
        raise exceptions.ArgumentError(message="weighted_sum: empty tensor list")

    if coeffs.ndim != 1 or coeffs.shape[0] != len(tensors):
        raise exceptions.ArgumentError(
            message=f"weighted_sum: {len(tensors)} tensors but coefficients of shape {coeffs.shape}",
            subject="weighted_sum"
        )

    for tensor in tensors[1:]:
        _same_shape("weighted_sum", tensors[0], tensor)

    out = coeffs.data[0] * tensors[0].data

    for k in range(1, len(tensors)):
        out = out + coeffs.data[k] * tensors[k].data

    def backward(g):

        grad_coeffs = numpy.array([numpy.sum(g * tensor.data) for tensor in tensors])

        return (grad_coeffs,) + tuple(coeffs.data[k] * g for k in range(len(tensors)))

    return _emit("weighted_sum", (coeffs, *tensors), out, backward)


def linear_resize_1d(v: Tensor, m: int) -> Tensor:
    """
    Align-corners linear interpolation of a vector to length m.
    """

    if v.ndim != 1 or m < 1:
        raise exceptions.ArgumentError(
            message=f"linear_resize_1d: cannot resize {v.shape} to {m}",
            subject="linear_resize_1d"
        )

    n = v.size

    if n == 1 or m == 1:
        low = numpy.zeros(m, dtype=numpy.int64)
        high = low
        frac = numpy.zeros(m)
    else:
        position = numpy.arange(m) * (n - 1) / (m - 1)
        low = numpy.minimum(numpy.floor(position).astype(numpy.int64), n - 1)
        high = numpy.minimum(low + 1, n - 1)
        frac = position - low

    out = v.data[low] + frac * (v.data[high] - v.data[low])

    def backward(g):

        grad = numpy.zeros_like(v.data)
        numpy.add.at(grad, low, g * (1.0 - frac))
        numpy.add.at(grad, high, g * frac)

        return (grad,)

    return _emit("linear_resize_1d", (v,), out, backward, {"low": low, "high": high, "frac": frac})


def softmax(a: Tensor) -> Tensor:

    if a.ndim != 1:
        raise exceptions.DimensionError(
            message=f"softmax: expected a vector, got {a.shape}",
            subject="softmax"
        )

    exp = numpy.exp(a.data - a.data.max())
    out = exp / exp.sum()

    return _emit("softmax", (a,), out, lambda g: (out * (g - numpy.dot(g, out)),))


def softmax_cross_entropy(logits: Tensor, labels: typing.Sequence[int]) -> Tensor:
    """
    Mean cross-entropy of row-wise softmax over N×C logits.
    """

    labels = numpy.asarray(labels, dtype=numpy.int64)

    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise exceptions.DimensionError(
            message=f"softmax_cross_entropy: logits {logits.shape} and labels {labels.shape} disagree",
            subject="softmax_cross_entropy"
        )

    rows = numpy.arange(labels.size)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = numpy.log(numpy.exp(shifted).sum(axis=1))
    loss = numpy.mean(log_norm - shifted[rows, labels])

    def backward(g):

        probs = numpy.exp(shifted - log_norm[:, None])
        probs[rows, labels] -= 1.0

        return (g * probs / labels.size,)

    return _emit("softmax_cross_entropy", (logits,), numpy.array(loss), backward)


def mean(a: Tensor) -> Tensor:
    return _emit("mean", (a,), numpy.array(a.data.mean()), lambda g: (numpy.full(a.shape, g / a.size),))


def backward(loss: Tensor, tape: typing.Optional[Tape] = None) -> None:
    """
    Accumulate d(loss)/d(tensor) into .grad of every tensor on the tape.
    """

    tape = tape if tape is not None else active_tape()

    if tape is None:
        raise exceptions.ContractViolationError(
            message="backward() needs the tape the loss was recorded on"
        )

    tape.backward(loss)


def zero_grads(params: typing.Iterable[Tensor]) -> None:

    for param in params:
        param.grad = None


def sgd_step(
    params: typing.Iterable[Tensor],
    lr: float,
    momentum: typing.Optional[float] = 0.0,
    weight_decay: typing.Optional[float] = 0.0,
    velocities: typing.Optional[typing.Dict[int, numpy.ndarray]] = None,
    skip_decay: typing.Optional[typing.Iterable[Tensor]] = None
) -> None:
    """
    One SGD update with heavy-ball momentum and L2 weight decay:

        v <- momentum * v + (grad + weight_decay * p)
        p <- p - lr * v

    Parameters without a gradient are left untouched. Momentum buffers live in
    velocities, keyed by id(param), so the caller keeps them across steps.
    """

    velocities = velocities if velocities is not None else {}
    no_decay = {id(param) for param in (skip_decay or ())}

    for param in params:
        if param.grad is None:
            continue

        grad = param.grad

        if weight_decay and id(param) not in no_decay:
            grad = grad + weight_decay * param.data

        if momentum:
            buffer = velocities.get(id(param))
            buffer = grad.copy() if buffer is None else momentum * buffer + grad
            velocities[id(param)] = buffer
            grad = buffer

        param.data -= lr * grad
