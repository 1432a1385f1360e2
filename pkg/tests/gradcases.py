"""Random gradient-check configurations for every differentiable op and frontend.

Each case builder takes a numpy Generator and returns ``(fn, params)`` where
``fn()`` rebuilds the output from ``params`` (so finite differences can
perturb them in place). Inputs avoid kinks (relu at 0, max-pool ties) and
tails where gradients underflow.
"""

import numpy as np

from medfront.autodiff import Tensor, ops
from medfront.frontends import FrontendConfig, LeafParams, init_nnaudio, leaf_forward, nnaudio_forward, pcen


def T(values):
    return Tensor(values, requires_grad=True)


def _shape(rng, ndim=2, lo=1, hi=4):
    return tuple(int(v) for v in rng.integers(lo, hi + 1, size=ndim))


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.uniform(margin, 2.0, size=shape)
    return x * rng.choice([-1.0, 1.0], size=shape)


def case_add(rng):
    s = _shape(rng)
    a, b = T(rng.standard_normal(s)), T(rng.standard_normal(s[-1:]))  # broadcast
    return (lambda: ops.add(a, b)), [a, b]


def case_sub(rng):
    s = _shape(rng)
    a, b = T(rng.standard_normal(s)), T(rng.standard_normal((1,) + s[1:]))
    return (lambda: ops.sub(a, b)), [a, b]


def case_mul(rng):
    s = _shape(rng, 3)
    a, b = T(rng.standard_normal(s)), T(rng.standard_normal(s))
    return (lambda: ops.mul(a, b)), [a, b]


def case_div(rng):
    s = _shape(rng)
    a, b = T(rng.standard_normal(s)), T(_away_from_zero(rng, s, 0.5))
    return (lambda: ops.div(a, b)), [a, b]


def case_neg(rng):
    a = T(rng.standard_normal(_shape(rng)))
    return (lambda: ops.neg(a)), [a]


def case_exp(rng):
    a = T(rng.uniform(-2, 2, _shape(rng)))
    return (lambda: ops.exp(a)), [a]


def case_log(rng):
    a = T(rng.uniform(0.05, 3, _shape(rng)))
    eps = float(rng.choice([1e-6, 1e-3, 0.1]))
    return (lambda: ops.log(a, eps)), [a]


def case_power(rng):
    s = _shape(rng)
    x = T(rng.uniform(0.2, 3, s))
    r = T(rng.uniform(0.5, 4, s[-1:]))  # learnable exponent, per channel
    return (lambda: ops.power(x, ops.div(1.0, r))), [x, r]


def case_relu(rng):
    a = T(_away_from_zero(rng, _shape(rng, 3)))
    return (lambda: ops.relu(a)), [a]


def case_sigmoid(rng):
    a = T(rng.uniform(-4, 4, _shape(rng)))
    return (lambda: ops.sigmoid(a)), [a]


def case_swish(rng):
    a = T(rng.uniform(-4, 4, _shape(rng)))
    return (lambda: ops.swish(a)), [a]


def case_cos_sin(rng):
    a = T(rng.uniform(-3, 3, _shape(rng)))
    return (lambda: ops.add(ops.cos(a), ops.mul(ops.sin(a), 2.0))), [a]


def case_reshape_transpose(rng):
    s = _shape(rng, 3, 2, 4)
    a = T(rng.standard_normal(s))
    perm = tuple(int(v) for v in rng.permutation(3))
    return (lambda: ops.flatten(ops.transpose(ops.reshape(a, s[::-1]), perm))), [a]


def case_sum_mean(rng):
    s = _shape(rng, 3)
    a = T(rng.standard_normal(s))
    axis = int(rng.integers(0, 3))
    keep = bool(rng.integers(0, 2))
    return (lambda: ops.add(ops.sum(a, axis=axis, keepdims=keep), ops.mean(a, axis=axis, keepdims=keep))), [a]


def case_matmul(rng):
    b, n, k, m = _shape(rng, 4)
    a, w = T(rng.standard_normal((b, n, k))), T(rng.standard_normal((k, m)))
    return (lambda: ops.matmul(a, w)), [a, w]


def case_dense(rng):
    b, i, o = _shape(rng, 3, 1, 5)
    x, w, bias = T(rng.standard_normal((b, i))), T(rng.standard_normal((o, i))), T(rng.standard_normal(o))
    return (lambda: ops.dense(x, w, bias)), [x, w, bias]


def case_conv1d(rng):
    b, cin, cout = _shape(rng, 3, 1, 3)
    k = int(rng.integers(1, 5))
    stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, 3))
    n = int(rng.integers(k + 1, 12))
    x, w, bias = T(rng.standard_normal((b, cin, n))), T(rng.standard_normal((cout, cin, k))), T(rng.standard_normal(cout))
    return (lambda: ops.conv1d(x, w, bias, stride, padding)), [x, w, bias]


def case_conv2d(rng):
    b, cin, cout = _shape(rng, 3, 1, 3)
    k = int(rng.choice([1, 2, 3]))
    stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, 2))
    h, w_ = (int(v) for v in rng.integers(k + 1, 8, size=2))
    x = T(rng.standard_normal((b, cin, h, w_)))
    w, bias = T(rng.standard_normal((cout, cin, k, k))), T(rng.standard_normal(cout))
    return (lambda: ops.conv2d(x, w, bias, stride, padding)), [x, w, bias]


def case_max_pool2d(rng):
    kernel = int(rng.integers(1, 4))
    stride = int(rng.integers(1, kernel + 1))
    s = (int(rng.integers(1, 3)), int(rng.integers(1, 3))) + tuple(int(v) for v in rng.integers(kernel, 8, size=2))
    # a shuffled grid keeps every window's maximum well separated from the runner-up
    x = T(rng.permutation(np.prod(s)).reshape(s) * 0.1)
    return (lambda: ops.max_pool2d(x, kernel, stride)), [x]


def case_mean_pool1d(rng):
    kernel = int(rng.integers(1, 5))
    stride = int(rng.integers(1, 4))
    x = T(rng.standard_normal(_shape(rng, 2) + (int(rng.integers(kernel, 15)),)))
    return (lambda: ops.mean_pool1d(x, kernel, stride)), [x]


def case_ema(rng):
    x = T(rng.uniform(0, 2, (int(rng.integers(1, 3)), int(rng.integers(2, 12)), int(rng.integers(1, 4)))))
    coeff = float(rng.uniform(0.01, 0.9))
    return (lambda: ops.ema(x, coeff, axis=-2)), [x]


def case_dropout(rng):
    x = T(rng.standard_normal(_shape(rng, 2, 2, 6)))
    p = float(rng.uniform(0, 0.9))
    seed = int(rng.integers(0, 2**31))
    return (lambda: ops.dropout(x, p, True, np.random.default_rng(seed))), [x]


def case_softmax_cross_entropy(rng):
    b, c = int(rng.integers(1, 6)), int(rng.integers(2, 5))
    logits = T(rng.standard_normal((b, c)) * 2)
    labels = rng.integers(0, c, size=b)
    return (lambda: ops.softmax_cross_entropy(logits, labels)), [logits]


def case_pcen(rng):
    t, c = int(rng.integers(2, 10)), int(rng.integers(1, 4))
    energy = T(rng.uniform(0.01, 3, (int(rng.integers(1, 3)), t, c)))
    alpha = T(rng.uniform(0.5, 2.5, c))
    delta = T(rng.uniform(0.5, 3, c))
    root = T(rng.uniform(1.5, 5, c))
    smooth = float(rng.uniform(0.02, 0.5))
    return (lambda: pcen(energy, alpha, delta, root, smooth)), [energy, alpha, delta, root]


SMALL = dict(sample_rate=400, window_ms=30.0, hop_ms=10.0, fmin_hz=10.0, fmax_hz=200.0)


def case_leaf(rng):
    c = int(rng.integers(2, 5))
    compression = str(rng.choice(["pcen", "log"]))
    cfg = FrontendConfig(n_filters=c, gabor_length=15, compression=compression, **SMALL)
    p = LeafParams(
        center_hz=T(np.sort(rng.uniform(20, 180, c))),
        bandwidth=T(rng.uniform(5, 40, c)),
        pool_width=T(rng.uniform(0.2, 0.6, c)),
        alpha=T(rng.uniform(0.5, 2.5, c)),
        delta=T(rng.uniform(0.5, 3, c)),
        root=T(rng.uniform(1.5, 5, c)),
    )
    x = rng.standard_normal((int(rng.integers(1, 3)), int(rng.integers(40, 80))))
    params = [p.center_hz, p.bandwidth, p.pool_width]
    if compression == "pcen":
        params += [p.alpha, p.delta, p.root]
    return (lambda: leaf_forward(x, p, cfg)), params


def case_nnaudio(rng):
    cfg = FrontendConfig(n_filters=int(rng.integers(2, 6)), **SMALL)
    p = init_nnaudio(cfg)
    # lift every mel weight off zero so the relu floor is not at a kink
    p.mel_weights.values = p.mel_weights.values + rng.uniform(0.05, 0.2, p.mel_weights.shape)
    p.cos_bank.values = p.cos_bank.values + 0.05 * rng.standard_normal(p.cos_bank.shape)
    p.sin_bank.values = p.sin_bank.values + 0.05 * rng.standard_normal(p.sin_bank.shape)
    x = rng.standard_normal((int(rng.integers(1, 3)), int(rng.integers(20, 40))))
    return (lambda: nnaudio_forward(x, p, cfg)), [p.cos_bank, p.sin_bank, p.mel_weights]


OP_CASES = {
    "add": case_add, "sub": case_sub, "mul": case_mul, "div": case_div, "neg": case_neg, "exp": case_exp,
    "log": case_log, "power": case_power, "relu": case_relu, "sigmoid": case_sigmoid, "swish": case_swish,
    "cos_sin": case_cos_sin, "reshape_transpose": case_reshape_transpose, "sum_mean": case_sum_mean,
    "matmul": case_matmul, "dense": case_dense, "conv1d": case_conv1d, "conv2d": case_conv2d,
    "max_pool2d": case_max_pool2d, "mean_pool1d": case_mean_pool1d, "ema": case_ema, "dropout": case_dropout,
    "softmax_cross_entropy": case_softmax_cross_entropy, "pcen": case_pcen,
}
FRONTEND_CASES = {"leaf": case_leaf, "nnaudio": case_nnaudio}
ALL_CASES = {**OP_CASES, **FRONTEND_CASES}
