"""Trainable parameter storage, initialisation, Adam and checkpoint files."""

from __future__ import annotations

import hashlib
import io
import struct
import zlib
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .tensor import Tensor

CHECKPOINT_MAGIC = b"CGCK"
CHECKPOINT_VERSION = 1


def rng_stream(seed, name):
    """Independent generator for the named stream under a master seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(name.encode("utf-8")),))
    return np.random.default_rng(ss)


def xavier_uniform(rng, shape):
    shape = tuple(shape)
    if len(shape) == 2:
        fan_in, fan_out = shape
    elif len(shape) == 4:
        receptive = shape[2] * shape[3]
        fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
    else:
        fan_in = fan_out = int(np.prod(shape))
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class ParamStore:
    """Ordered name -> Tensor mapping plus Adam moment buffers."""

    def __init__(self):
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self.adam_m: dict[str, np.ndarray] = {}
        self.adam_v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name, value):
        if name in self.params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(value, requires_grad=True)
        self.params[name] = t
        return t

    def __getitem__(self, name):
        return self.params[name]

    def __contains__(self, name):
        return name in self.params

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)

    def names(self):
        return list(self.params)

    def num_scalars(self):
        return sum(t.size for t in self.params.values())

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    def snapshot(self):
        return {name: t.data.copy() for name, t in self.params.items()}

    def restore(self, snap):
        for name, value in snap.items():
            self.params[name].data[...] = value

    def fill(self, value=0.0):
        for t in self.params.values():
            t.data[...] = value

    def adam_step(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        """One Adam update with bias correction; gradients are zeroed afterwards."""
        self.step += 1
        t = self.step
        c1 = 1.0 - beta1 ** t
        c2 = 1.0 - beta2 ** t
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.adam_m.get(name)
            if m is None:
                m = self.adam_m[name] = np.zeros_like(p.data)
                self.adam_v[name] = np.zeros_like(p.data)
            v = self.adam_v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.data.dtype)
        self.zero_grad()

    # -- checkpoints --------------------------------------------------
    def to_bytes(self):
        buf = io.BytesIO()
        buf.write(CHECKPOINT_MAGIC)
        buf.write(struct.pack("<II", CHECKPOINT_VERSION, len(self.params)))
        for name, t in self.params.items():
            raw = name.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
            buf.write(struct.pack("<I", t.ndim))
            buf.write(struct.pack(f"<{t.ndim}I", *t.shape))
            buf.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())
        return buf.getvalue()

    def save(self, path):
        Path(path).write_bytes(self.to_bytes())

    def digest(self):
        return hashlib.sha256(self.to_bytes()).hexdigest()

    @classmethod
    def from_bytes(cls, blob):
        view = memoryview(blob)
        if bytes(view[:4]) != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint file")
        version, count = struct.unpack_from("<II", view, 4)
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        pos = 12
        store = cls()
        for _ in range(count):
            (n,) = struct.unpack_from("<I", view, pos)
            pos += 4
            name = bytes(view[pos:pos + n]).decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", view, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}I", view, pos)
            pos += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            values = np.frombuffer(view, dtype="<f4", count=size, offset=pos).reshape(dims)
            pos += 4 * size
            store.add(name, values.copy())
        if pos != len(view):
            raise ValueError("trailing bytes in checkpoint")
        return store

    @classmethod
    def load(cls, path):
        return cls.from_bytes(Path(path).read_bytes())

    def load_values_from(self, other):
        """Copy values from another store with identical names and shapes."""
        if other.names() != self.names():
            raise KeyError("parameter names differ")
        for name, t in self.params.items():
            if other[name].shape != t.shape:
                raise ValueError(f"shape mismatch for {name}: {other[name].shape} vs {t.shape}")
            t.data[...] = other[name].data
