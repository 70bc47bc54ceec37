"""Differentiable primitives.

Every function takes tensors (or array-likes, treated as constants) and
returns a new :class:`Tensor` whose backward closure yields one gradient per
parent, in parent order.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch
from .tensor import Tensor, _check_broadcast, _make, _unbroadcast, as_tensor


# ---------------------------------------------------------------- arithmetic
def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)

    def backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return _make(a.data * b.data, (a, b), backward, "mul")


def matmul(a, b):
    """Matrix product with numpy batching rules (both operands at least 2-D)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeMismatch("matmul", a.shape, b.shape) from None

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return _make(out, (a, b), backward, "matmul")


# ---------------------------------------------------------------- shape ops
def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeMismatch("concat", tensors[0].shape, tensors[-1].shape) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, tuple(tensors), backward, "concat")


def slice_(a, idx):
    """Basic or advanced indexing, ``a[idx]``."""
    a = as_tensor(a)
    out = a.data[idx]
    basic = not _has_array_index(idx)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:
            full[idx] += g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _make(out, (a,), backward, "slice")


def _has_array_index(idx):
    if not isinstance(idx, tuple):
        idx = (idx,)
    return any(isinstance(i, (list, np.ndarray)) for i in idx)


def reshape(a, shape):
    a = as_tensor(a)
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),), "reshape")


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))
    return _make(np.transpose(a.data, axes), (a,),
                 lambda g: (np.transpose(g, inverse),), "transpose")


# ---------------------------------------------------------------- pointwise
def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def dropout(a, p, training, rng):
    """Inverted dropout: survivors are scaled by 1/(1-p) at train time."""
    a = as_tensor(a)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    keep = (rng.random(a.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    return _make(a.data * keep, (a,), lambda g: (g * keep,), "dropout")


# ---------------------------------------------------------------- reductions
def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward, "sum")


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        n = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([a.shape[i] for i in axes]))
    return mul(sum_(a, axis, keepdims), 1.0 / n)


def softmax(a, axis=-1):
    a = as_tensor(a)
    x = a.data
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), backward, "softmax")


def log_softmax_np(x, axis=-1):
    """Plain numpy log-softmax used at inference time."""
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


# ---------------------------------------------------------------- lookups
def embedding_lookup(table, indices):
    """Rows of ``table`` selected by an integer array of any shape."""
    table = as_tensor(table)
    idx = np.asarray(indices, dtype=np.int64)
    out = table.data[idx]

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx.reshape(-1), g.reshape(-1, table.shape[-1]))
        return (full,)

    return _make(out, (table,), backward, "embedding")


# ---------------------------------------------------------------- conv / pool
def conv_2d(x, kernels, bias, padding="same"):
    """2-D cross-correlation, stride 1.

    x: (B, C_in, H, W); kernels: (C_out, C_in, kh, kw); bias: (C_out,).
    ``padding='same'`` zero-pads so the output keeps (H, W) (odd kernels).
    """
    x, kernels, bias = as_tensor(x), as_tensor(kernels), as_tensor(bias)
    if x.ndim != 4 or kernels.ndim != 4 or kernels.shape[1] != x.shape[1]:
        raise ShapeMismatch("conv_2d", x.shape, kernels.shape)
    if bias.shape != (kernels.shape[0],):
        raise ShapeMismatch("conv_2d bias", bias.shape, (kernels.shape[0],))
    kh, kw = kernels.shape[2:]
    if padding == "same":
        ph, pw = kh // 2, kw // 2
    elif padding == "valid":
        ph = pw = 0
    else:
        raise ValueError(f"unknown padding {padding!r}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    # windows: (B, C_in, H_out, W_out, kh, kw)
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    out = np.einsum("bchwij,ocij->bohw", windows, kernels.data, optimize=True)
    out = out + bias.data[None, :, None, None]
    h_out, w_out = out.shape[2:]

    def backward(g):
        gx = gk = gb = None
        if bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        if kernels.requires_grad:
            gk = np.einsum("bohw,bchwij->ocij", g, windows, optimize=True)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + h_out, j:j + w_out] += np.einsum(
                        "bohw,oc->bchw", g, kernels.data[:, :, i, j], optimize=True)
            gx = gxp[:, :, ph:ph + x.shape[2], pw:pw + x.shape[3]]
        return gx, gk, gb

    return _make(out.astype(x.data.dtype, copy=False), (x, kernels, bias), backward, "conv_2d")


def max_pool_2d(x, kernel=(2, 2), stride=(2, 2)):
    """Max pooling over the last two axes of (B, C, H, W); floor mode."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeMismatch("max_pool_2d", x.shape, (0, 0, 0, 0))
    kh, kw = kernel
    sh, sw = stride
    b, c, h, w = x.shape
    h_out = (h - kh) // sh + 1
    w_out = (w - kw) // sw + 1
    if h_out < 1 or w_out < 1:
        raise ShapeMismatch("max_pool_2d", x.shape, kernel)
    windows = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw][:, :, :h_out, :w_out]
    flat = windows.reshape(b, c, h_out, w_out, kh * kw)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gx = np.zeros_like(x.data)
        di, dj = np.divmod(arg, kw)
        rows = np.arange(h_out)[:, None] * sh + di
        cols = np.arange(w_out)[None, :] * sw + dj
        bi = np.arange(b)[:, None, None, None]
        ci = np.arange(c)[None, :, None, None]
        np.add.at(gx, (bi, ci, rows, cols), g)
        return (gx,)

    return _make(out, (x,), backward, "max_pool_2d")


# ---------------------------------------------------------------- losses
def cross_entropy_with_logits(logits, targets, ignore_index=None):
    """Mean softmax cross-entropy over rows whose target != ignore_index.

    logits: (N, r); targets: int array (N,).
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != targets.shape[0]:
        raise ShapeMismatch("cross_entropy_with_logits", logits.shape, targets.shape)
    x = logits.data.astype(np.float64)
    shifted = x - x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(targets))
    valid = np.ones(len(targets), bool) if ignore_index is None else targets != ignore_index
    n = max(int(valid.sum()), 1)
    safe_t = np.where(valid, targets, 0)
    nll = lse - shifted[rows, safe_t]
    loss = (nll * valid).sum() / n

    def backward(g):
        p = np.exp(shifted - lse[:, None])
        p[rows, safe_t] -= 1.0
        p *= valid[:, None] / n
        return ((g * p).astype(logits.data.dtype),)

    return _make(np.asarray(loss), (logits,), backward, "cross_entropy")


def mse(pred, target):
    """Mean squared error, mean over all elements."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeMismatch("mse", pred.shape, target.shape)
    diff = pred.data - target.data
    n = diff.size

    def backward(g):
        gp = g * 2.0 * diff / n
        return gp, (-gp if target.requires_grad else None)

    return _make(np.asarray((diff * diff).sum() / n), (pred, target), backward, "mse")
