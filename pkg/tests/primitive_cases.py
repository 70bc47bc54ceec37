"""Random small-shape graphs, one per autodiff primitive, for gradient checks."""

from __future__ import annotations

import numpy as np

from commitgen.autodiff import ops
from commitgen.autodiff.params import ParamStore


def _dims(rng, k):
    return tuple(int(d) for d in rng.integers(1, 7, size=k))


def _away_from_zero(rng, shape):
    x = rng.uniform(0.1, 1.0, size=shape)
    return x * rng.choice([-1.0, 1.0], size=shape)


def _distinct(rng, shape):
    # spacing well above the finite-difference step so maxima never swap
    n = int(np.prod(shape))
    return (rng.permutation(n) * 0.05).reshape(shape) - n * 0.025


def _weighted(out, rng_w):
    """Scalar readout sum(out * w) so every output entry matters."""
    w = rng_w.normal(size=out.shape)
    return ops.sum_(ops.mul(out, w))


def make_case(name, seed):
    """(ParamStore, f) for primitive ``name``; ``f()`` rebuilds the graph each call."""
    rng = np.random.default_rng(seed)
    store = ParamStore()
    w_seed = int(rng.integers(1 << 30))

    def readout(out):
        return _weighted(out, np.random.default_rng(w_seed))

    if name in ("add", "sub", "mul"):
        m, n = _dims(rng, 2)
        a = store.add("a", rng.normal(size=(m, n)))
        b = store.add("b", rng.normal(size=(1, n)))  # broadcast operand
        fn = getattr(ops, name)
        return store, lambda: readout(fn(a, b))
    if name == "matmul":
        m, k, n = _dims(rng, 3)
        a = store.add("a", rng.normal(size=(m, k)))
        b = store.add("b", rng.normal(size=(k, n)))
        return store, lambda: readout(ops.matmul(a, b))
    if name == "concat":
        m, n1, n2 = _dims(rng, 3)
        a = store.add("a", rng.normal(size=(m, n1)))
        b = store.add("b", rng.normal(size=(m, n2)))
        return store, lambda: readout(ops.concat([a, b], axis=1))
    if name == "slice":
        m, n = _dims(rng, 2)
        a = store.add("a", rng.normal(size=(m + 1, n)))
        rows = rng.integers(0, m + 1, size=4)  # repeated rows accumulate
        return store, lambda: readout(ops.slice_(a, rows)) + readout(ops.slice_(a, slice(1, None)))
    if name == "reshape":
        m, n = _dims(rng, 2)
        a = store.add("a", rng.normal(size=(m, n)))
        return store, lambda: readout(ops.reshape(a, (n, m)))
    if name == "transpose":
        d = _dims(rng, 3)
        a = store.add("a", rng.normal(size=d))
        return store, lambda: readout(ops.transpose(a, (2, 0, 1)))
    if name in ("tanh", "sigmoid", "relu"):
        a = store.add("a", _away_from_zero(rng, _dims(rng, 2)))
        fn = getattr(ops, name)
        return store, lambda: readout(fn(a))
    if name == "dropout":
        a = store.add("a", rng.normal(size=_dims(rng, 2)))
        mask_seed = int(rng.integers(1 << 30))
        return store, lambda: readout(ops.dropout(a, 0.3, True, np.random.default_rng(mask_seed)))
    if name in ("sum", "mean"):
        a = store.add("a", rng.normal(size=_dims(rng, 3)))
        fn = ops.sum_ if name == "sum" else ops.mean
        return store, lambda: readout(fn(a, axis=1)) + fn(a)
    if name == "softmax":
        a = store.add("a", rng.normal(size=_dims(rng, 2)))
        return store, lambda: readout(ops.softmax(a, axis=-1))
    if name == "embedding":
        v, d = _dims(rng, 2)
        table = store.add("table", rng.normal(size=(v, d)))
        idx = rng.integers(0, v, size=(2, 3))
        return store, lambda: readout(ops.embedding_lookup(table, idx))
    if name == "conv_2d":
        h, w, c_in, c_out = _dims(rng, 4)
        x = store.add("x", rng.normal(size=(1, c_in, h, w)))
        k = store.add("k", rng.normal(size=(c_out, c_in, 3, 3)))
        b = store.add("b", rng.normal(size=(c_out,)))
        return store, lambda: readout(ops.conv_2d(x, k, b))
    if name == "max_pool_2d":
        c = int(rng.integers(1, 4))
        h, w = (int(d) for d in rng.integers(2, 7, size=2))
        x = store.add("x", _distinct(rng, (1, c, h, w)))
        return store, lambda: readout(ops.max_pool_2d(x))
    if name == "cross_entropy":
        n, r = _dims(rng, 2)
        logits = store.add("logits", rng.normal(size=(n, r + 1)))
        targets = rng.integers(0, r + 1, size=n)
        targets[0] = -1 if n > 1 else targets[0]
        return store, lambda: ops.cross_entropy_with_logits(logits, targets, ignore_index=-1)
    if name == "mse":
        shape = _dims(rng, 2)
        pred = store.add("pred", rng.normal(size=shape))
        target = rng.normal(size=shape)
        return store, lambda: ops.mse(pred, target)
    raise KeyError(name)


PRIMITIVES = ("add", "sub", "mul", "matmul", "concat", "slice", "reshape", "transpose", "tanh",
              "sigmoid", "relu", "dropout", "sum", "mean", "softmax", "embedding", "conv_2d",
              "max_pool_2d", "cross_entropy", "mse")
