"""Differentiable primitives.

Every function takes and returns :class:`Tensor` and registers its
backward rule on the active tape. Layouts follow the usual conventions:
sequences are ``(batch, channels, length)``, dense inputs ``(batch, features)``,
linear weights ``(out, in)``, conv weights ``(out, in, kernel)``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

from ..errors import InvalidArgumentError, ShapeError
from .tensor import Tensor, as_tensor, make_result


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


# elementwise -----------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return make_result(a.data + b.data, (a, b),
                       lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return make_result(a.data - b.data, (a, b),
                       lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return make_result(a.data * b.data, (a, b),
                       lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    out = a.data / b.data
    return make_result(out, (a, b),
                       lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)))


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    return make_result(x.data * c, (x,), lambda g: (g * c,))


def clamp_min(x, lo: float) -> Tensor:
    x = as_tensor(x)
    keep = x.data > lo
    return make_result(np.where(keep, x.data, lo), (x,), lambda g: (g * keep,))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_result(x.data * mask, (x,), lambda g: (g * mask,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return make_result(s, (x,), lambda g: (g * s * (1.0 - s),))


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return make_result(out, (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return make_result(np.log(x.data), (x,), lambda g: (g / x.data,))


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    s = np.exp(z)
    s /= s.sum(axis=axis, keepdims=True)
    return make_result(s, (x,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


# reductions and reshaping -------------------------------------------------------

def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_result(out, (x,), back)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def dot(a, b) -> Tensor:
    """Inner product over the last axis (broadcast over leading axes)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1:] != b.shape[-1:]:
        raise ShapeError(f"dot: last dimensions differ, {a.shape} vs {b.shape}")
    _broadcast_shape("dot", a, b)
    out = np.sum(a.data * b.data, axis=-1)
    return make_result(out, (a, b), lambda g: (
        _unbroadcast(g[..., None] * b.data, a.shape),
        _unbroadcast(g[..., None] * a.data, b.shape),
    ))


def l2_norm(x, axis: int = -1, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    n = np.sqrt(np.sum(x.data ** 2, axis=axis, keepdims=True))

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        safe = np.where(n > 0, n, 1.0)
        return (np.where(n > 0, g * x.data / safe, 0.0),)

    return make_result(n if keepdims else np.squeeze(n, axis=axis), (x,), back)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}") from None
    return make_result(out, (x,), lambda g: (g.reshape(x.shape),))


def flatten(x) -> Tensor:
    x = as_tensor(x)
    return reshape(x, (x.shape[0], -1))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e} (shapes {[t.shape for t in tensors]})") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return make_result(out, tensors, lambda g: tuple(np.split(g, bounds, axis=axis)))


def take(x, index) -> Tensor:
    """Gather rows along axis 0; ``index`` may have any integer shape."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)

    def back(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, index, g)
        return (dx,)

    return make_result(x.data[index], (x,), back)


def global_avg_pool(x) -> Tensor:
    """Mean over the time (last) axis."""
    return mean(x, axis=-1)


# layers ---------------------------------------------------------------------------

def linear(x, weight, bias=None) -> Tensor:
    x, weight = as_tensor(x), as_tensor(weight)
    if x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"linear: input has {x.shape[-1]} features, weight expects {weight.shape[1]}")
    out = x.data @ weight.data.T
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        inputs.append(bias)

    def back(g):
        grads = [g @ weight.data, g.T @ x.data]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    return make_result(out, inputs, back)


def conv_out_length(length: int, kernel: int, stride: int = 1, dilation: int = 1, left_pad: int = 0) -> int:
    return (length + left_pad - dilation * (kernel - 1) - 1) // stride + 1


def conv1d(x, weight, bias=None, stride: int = 1, dilation: int = 1, left_pad: int = 0) -> Tensor:
    """1-D convolution (cross-correlation) with zero padding on the left only."""
    x, weight = as_tensor(x), as_tensor(weight)
    if stride < 1 or dilation < 1 or left_pad < 0:
        raise InvalidArgumentError("conv1d: stride and dilation must be >= 1, left_pad >= 0")
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError(f"conv1d: expected (B, C, L) input and (O, C, K) weight, got {x.shape}, {weight.shape}")
    B, C, L = x.shape
    O, Cw, K = weight.shape
    if C != Cw:
        raise ShapeError(f"conv1d: input has {C} channels, weight expects {Cw}")
    Lout = conv_out_length(L, K, stride, dilation, left_pad)
    if Lout < 1:
        raise ShapeError(f"conv1d: kernel {K} (dilation {dilation}) does not fit length {L}")

    xp = np.pad(x.data, ((0, 0), (0, 0), (left_pad, 0))) if left_pad else x.data
    xp = np.ascontiguousarray(xp)
    sb, sc, sl = xp.strides
    cols = as_strided(xp, shape=(B, C, K, Lout), strides=(sb, sc, dilation * sl, stride * sl))
    cols = cols.reshape(B, C * K, Lout)
    w2 = weight.data.reshape(O, C * K)
    out = np.matmul(w2, cols)
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[None, :, None]
        inputs.append(bias)

    def back(g):
        dw = np.tensordot(g, cols, axes=([0, 2], [0, 2])).reshape(weight.shape)
        dcols = np.matmul(w2.T, g).reshape(B, C, K, Lout)
        dxp = np.zeros((B, C, L + left_pad))
        span = stride * (Lout - 1) + 1
        for j in range(K):
            dxp[:, :, j * dilation : j * dilation + span : stride] += dcols[:, :, j, :]
        grads = [dxp[:, :, left_pad:], dw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    return make_result(out, inputs, back)


def pool_out_length(length: int, kernel: int, stride: int) -> int:
    return (length - kernel) // stride + 1


def maxpool1d(x, kernel: int, stride: int | None = None) -> Tensor:
    """Max pooling over time; ties send the gradient to the first maximum."""
    x = as_tensor(x)
    stride = kernel if stride is None else stride
    B, C, L = x.shape
    Lout = pool_out_length(L, kernel, stride)
    if Lout < 1:
        raise ShapeError(f"maxpool1d: kernel {kernel} does not fit length {L}")
    data = np.ascontiguousarray(x.data)
    sb, sc, sl = data.strides
    win = as_strided(data, shape=(B, C, Lout, kernel), strides=(sb, sc, stride * sl, sl))
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    pos = arg + stride * np.arange(Lout)

    def back(g):
        dx = np.zeros_like(x.data)
        bi, ci, _ = np.indices(pos.shape)
        np.add.at(dx, (bi, ci, pos), g)
        return (dx,)

    return make_result(out, (x,), back)


def batchnorm1d(x, gamma, beta, running_mean: np.ndarray, running_var: np.ndarray,
                training: bool, momentum: float = 0.1, eps: float = 1e-5,
                update_stats: bool = True) -> Tensor:
    """Batch normalization over the batch (and time) axes of ``(B, C[, L])``.

    In training mode the running statistics are updated in place
    (unbiased variance), unless ``update_stats`` is off.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim not in (2, 3) or x.shape[1] != gamma.shape[0]:
        raise ShapeError(f"batchnorm1d: input {x.shape} does not match {gamma.shape[0]} features")
    axes = (0,) if x.ndim == 2 else (0, 2)
    bshape = (1, -1) if x.ndim == 2 else (1, -1, 1)
    g_, b_ = gamma.data.reshape(bshape), beta.data.reshape(bshape)

    if training:
        n = x.data.size // x.shape[1]
        if n < 2:
            raise ShapeError("batchnorm1d: training mode needs more than one value per channel")
        mu = x.data.mean(axis=axes, keepdims=True)
        var = x.data.var(axis=axes, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu) * inv
        if update_stats:
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu.reshape(-1)
            running_var *= 1.0 - momentum
            running_var += momentum * var.reshape(-1) * n / (n - 1)

        def back(gr):
            dxhat = gr * g_
            dx = inv / n * (n * dxhat - dxhat.sum(axis=axes, keepdims=True)
                            - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
            return dx, (gr * xhat).sum(axis=axes), gr.sum(axis=axes)
    else:
        inv = 1.0 / np.sqrt(running_var.reshape(bshape) + eps)
        xhat = (x.data - running_mean.reshape(bshape)) * inv

        def back(gr):
            return gr * g_ * inv, (gr * xhat).sum(axis=axes), gr.sum(axis=axes)

    return make_result(xhat * g_ + b_, (x, gamma, beta), back)


def dropout(x, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-p); identity in eval."""
    x = as_tensor(x)
    if not 0 <= p < 1:
        raise InvalidArgumentError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0:
        return x
    if rng is None:
        raise InvalidArgumentError("dropout in training mode needs a random generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return make_result(x.data * mask, (x,), lambda g: (g * mask,))
