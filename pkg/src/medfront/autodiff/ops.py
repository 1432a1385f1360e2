"""Differentiable operators.

Each op computes its forward value with numpy and registers a closure mapping the
output cotangent to input cotangents. Inputs that are plain arrays or numbers are
treated as constants.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, as_tensor, make_output

__all__ = [
    "add", "sub", "mul", "div", "neg", "matmul", "sum", "mean", "reshape", "transpose",
    "exp", "log", "power", "relu", "sigmoid", "swish", "cos", "sin", "conv1d", "conv2d",
    "max_pool2d", "mean_pool1d", "dropout", "dense", "softmax_cross_entropy", "ema",
    "flatten", "softmax",
]


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shapes(kind, a: Tensor, b: Tensor):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# ------------------------------------------------------------------ elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_output("add", a.values + b.values, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_output("sub", a.values - b.values, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.values, a.shape), _unbroadcast(g * a.values, b.shape)

    return make_output("mul", a.values * b.values, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shapes("div", a, b)
    out = a.values / b.values

    def backward(g):
        return (
            _unbroadcast(g / b.values, a.shape),
            _unbroadcast(-g * out / b.values, b.shape),
        )

    return make_output("div", out, (a, b), backward)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_output("neg", -a.values, (a,), lambda g: (-g,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.values)
    return make_output("exp", out, (a,), lambda g: (g * out,))


def log(a, eps: float = 1e-6) -> Tensor:
    """Natural log of ``a + eps``."""
    a = as_tensor(a)
    shifted = a.values + eps
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(shifted)
    return make_output("log", out, (a,), lambda g: (g / shifted,))


def power(a, p) -> Tensor:
    """``a ** p`` with both base and exponent differentiable (base must be >= 0
    unless the exponent is a constant integer)."""
    a, p = as_tensor(a), as_tensor(p)
    _broadcast_shapes("power", a, p)
    x, e = a.values, p.values
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.power(x, e)

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = e * np.power(x, e - 1.0)
            dx = np.where(x == 0, np.where(e > 1, 0.0, np.where(e == 1, 1.0, np.inf)), dx)
            dx = np.where(e == 0, 0.0, dx)
            gp = None
            if p.requires_grad:
                dp = np.where(x > 0, out * np.log(np.where(x > 0, x, 1.0)), 0.0)
                gp = _unbroadcast(g * dp, p.shape)
        return _unbroadcast(g * dx, a.shape), gp

    return make_output("power", out, (a, p), backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.values > 0
    return make_output("relu", np.where(mask, a.values, 0.0), (a,), lambda g: (g * mask,))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.values)
    return make_output("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def swish(a) -> Tensor:
    """x * sigmoid(x)."""
    a = as_tensor(a)
    s = _sigmoid(a.values)
    out = a.values * s
    return make_output("swish", out, (a,), lambda g: (g * (s + out * (1.0 - s)),))


def cos(a) -> Tensor:
    a = as_tensor(a)
    return make_output("cos", np.cos(a.values), (a,), lambda g: (-g * np.sin(a.values),))


def sin(a) -> Tensor:
    a = as_tensor(a)
    return make_output("sin", np.sin(a.values), (a,), lambda g: (g * np.cos(a.values),))


# -------------------------------------------------------------------- reshaping


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.values.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} to {tuple(shape)}") from None
    return make_output("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def flatten(a) -> Tensor:
    """Collapse all but the leading (batch) axis."""
    a = as_tensor(a)
    return reshape(a, (a.shape[0], -1))


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_output(
        "transpose", np.transpose(a.values, axes), (a,), lambda g: (np.transpose(g, inverse),)
    )


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    out = a.values.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_output("sum", out, (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# --------------------------------------------------------------------- products


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    out = np.matmul(a.values, b.values)

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.values, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.values, -1, -2), g), b.shape)
        return ga, gb

    return make_output("matmul", out, (a, b), backward)


def dense(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` shaped (out_features, in_features)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"dense: input {x.shape} does not match weight {weight.shape}")
    out = x.values @ weight.values.T
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"dense: bias {bias.shape} does not match weight {weight.shape}")
        out = out + bias.values
        inputs.append(bias)

    def backward(g):
        grads = [g @ weight.values, g.T @ x.values]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    return make_output("dense", out, inputs, backward)


def _pad_last(x: np.ndarray, pads: list[int]) -> np.ndarray:
    if not any(pads):
        return x
    width = [(0, 0)] * (x.ndim - len(pads)) + [(p, p) for p in pads]
    return np.pad(x, width)


def conv1d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of (B, Cin, N) with (Cout, Cin, K) -> (B, Cout, Nout)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 3 or weight.ndim != 3 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv1d: input {x.shape} does not match weight {weight.shape}")
    _, _, n = x.shape
    cout, _, k = weight.shape
    nout = (n + 2 * padding - k) // stride + 1
    if nout < 1:
        raise ShapeError(f"conv1d: input {x.shape} too short for kernel {weight.shape}")
    xp = _pad_last(x.values, [padding])
    span = stride * (nout - 1) + 1
    out = np.zeros((cout, x.shape[0], nout))
    for i in range(k):
        out += np.tensordot(weight.values[:, :, i], xp[:, :, i : i + span : stride], axes=([1], [1]))
    out = out.transpose(1, 0, 2)
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.values[:, None]
        inputs.append(bias)

    def backward(g):
        gt = np.ascontiguousarray(g.transpose(1, 0, 2))
        gw = np.empty_like(weight.values)
        gxp = np.zeros((xp.shape[1], xp.shape[0], xp.shape[2]))
        for i in range(k):
            xs = xp[:, :, i : i + span : stride]
            gw[:, :, i] = np.tensordot(gt, xs, axes=([1, 2], [0, 2]))
            if x.requires_grad:
                gxp[:, :, i : i + span : stride] += np.tensordot(weight.values[:, :, i].T, gt, axes=([1], [0]))
        gx = gxp.transpose(1, 0, 2)
        if padding:
            gx = gx[:, :, padding:-padding]
        grads = [np.ascontiguousarray(gx), gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    return make_output("conv1d", out, inputs, backward)


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of (B, Cin, H, W) with (Cout, Cin, kh, kw) -> (B, Cout, Ho, Wo).

    Patches are unrolled into a (B*Ho*Wo, Cin*kh*kw) matrix so both passes are
    single matrix products.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d: input {x.shape} does not match weight {weight.shape}")
    b, _, h, w = x.shape
    cout, cin, kh, kw = weight.shape
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: input {x.shape} too small for kernel {weight.shape}")
    xp = _pad_last(x.values, [padding, padding])
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :ho, :wo]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, cin * kh * kw)
    wmat = weight.values.reshape(cout, -1)
    out = (cols @ wmat.T).reshape(b, ho, wo, cout).transpose(0, 3, 1, 2)
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.values[:, None, None]
        inputs.append(bias)
    sh, sw = stride * (ho - 1) + 1, stride * (wo - 1) + 1

    def backward(g):
        gt = g.transpose(0, 2, 3, 1).reshape(-1, cout)
        gw = (gt.T @ cols).reshape(weight.shape)
        gx = None
        if x.requires_grad:
            gcols = (gt @ wmat).reshape(b, ho, wo, cin, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + sh : stride, j : j + sw : stride] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            gx = gxp[:, :, padding : padding + h, padding : padding + w]
            gx = np.ascontiguousarray(gx)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return make_output("conv2d", out, inputs, backward)


# ---------------------------------------------------------------------- pooling


def max_pool2d(x, kernel: int, stride: int | None = None) -> Tensor:
    """Max pooling over the last two axes of (B, C, H, W); the remainder is dropped."""
    x = as_tensor(x)
    stride = kernel if stride is None else stride
    if x.ndim != 4:
        raise ShapeError(f"max_pool2d: expected a 4-D input, got {x.shape}")
    b, c, h, w = x.shape
    ho, wo = (h - kernel) // stride + 1, (w - kernel) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"max_pool2d: input {x.shape} smaller than pooling kernel {kernel}")
    win = np.lib.stride_tricks.sliding_window_view(x.values, (kernel, kernel), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :ho, :wo].reshape(b, c, ho, wo, kernel * kernel)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gx = np.zeros_like(x.values)
        di, dj = np.divmod(arg, kernel)
        rows = np.arange(ho)[:, None] * stride + di
        cols = np.arange(wo)[None, :] * stride + dj
        bi = np.arange(b)[:, None, None, None]
        ci = np.arange(c)[None, :, None, None]
        if stride >= kernel:
            # windows do not overlap, so every input cell is hit at most once
            gx[bi, ci, rows, cols] = g
        else:
            np.add.at(gx, (bi, ci, rows, cols), g)
        return (gx,)

    return make_output("max_pool2d", out, (x,), backward)


def mean_pool1d(x, kernel: int, stride: int | None = None) -> Tensor:
    """Average pooling along the last axis."""
    x = as_tensor(x)
    stride = kernel if stride is None else stride
    n = x.shape[-1]
    nout = (n - kernel) // stride + 1
    if nout < 1:
        raise ShapeError(f"mean_pool1d: input {x.shape} shorter than kernel {kernel}")
    win = np.lib.stride_tricks.sliding_window_view(x.values, kernel, axis=-1)[..., ::stride, :]
    out = win[..., :nout, :].mean(axis=-1)
    span = stride * (nout - 1) + 1

    def backward(g):
        gx = np.zeros_like(x.values)
        for i in range(kernel):
            gx[..., i : i + span : stride] += g / kernel
        return (gx,)

    return make_output("mean_pool1d", out, (x,), backward)


def ema(x, coeff: float, axis: int = -2) -> Tensor:
    """First-order smoother along ``axis``: m_0 = x_0, m_t = (1-coeff) m_{t-1} + coeff x_t."""
    x = as_tensor(x)
    v = np.moveaxis(x.values, axis, 0)
    m = np.empty_like(v)
    m[0] = v[0]
    for t in range(1, v.shape[0]):
        m[t] = (1.0 - coeff) * m[t - 1] + coeff * v[t]

    def backward(g):
        gv = np.moveaxis(g, axis, 0)
        gx = np.empty_like(gv)
        acc = np.zeros_like(gv[0])
        for t in range(gv.shape[0] - 1, 0, -1):
            acc = acc + gv[t]
            gx[t] = coeff * acc
            acc = (1.0 - coeff) * acc
        gx[0] = acc + gv[0]
        return (np.moveaxis(gx, 0, axis),)

    return make_output("ema", np.moveaxis(m, 0, axis), (x,), backward)


# ---------------------------------------------------------------- stochasticity


def dropout(x, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; the identity when ``train`` is false or ``p == 0``."""
    x = as_tensor(x)
    if not 0 <= p < 1:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not train or p == 0:
        return x
    if rng is None:
        raise ValueError("dropout at train time needs a random generator")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return make_output("dropout", x.values * mask, (x,), lambda g: (g * mask,))


# ----------------------------------------------------------------------- losses


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean cross-entropy of integer ``labels`` under softmax(``logits``)."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(
            f"softmax_cross_entropy: logits {logits.shape} do not match labels {labels.shape}"
        )
    n = logits.shape[0]
    z = logits.values - logits.values.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = np.mean(logsum - z[np.arange(n), labels])

    def backward(g):
        probs = softmax(logits.values)
        probs[np.arange(n), labels] -= 1.0
        return (g * probs / n,)

    return make_output("softmax_cross_entropy", loss, (logits,), backward)
