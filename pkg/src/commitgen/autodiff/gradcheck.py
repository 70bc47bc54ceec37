"""Central-difference gradient verification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import using_dtype


@dataclass
class GradCheckEntry:
    name: str
    index: tuple
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    eps: float
    tol_rel: float
    checked: int = 0
    max_rel_error: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def __str__(self):
        state = "ok" if self.passed else f"{len(self.failures)} failures"
        return f"gradcheck: {self.checked} entries, max rel err {self.max_rel_error:.2e} ({state})"


def relative_error(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def grad_check(f, params, eps=1e-3, tol_rel=1e-2, max_entries=None, seed=0,
               reference_dtype=np.float64):
    """Compare backprop gradients of scalar ``f()`` against central differences.

    ``params`` is a ParamStore (or any iterable of (name, Tensor)). ``f`` must
    rebuild the graph on each call and be deterministic. When ``max_entries``
    is given and the store is larger, a uniform sample of that many scalar
    entries is checked.

    The analytic gradient is computed in the working dtype. The finite
    differences are evaluated in ``reference_dtype`` around the same parameter
    values, because float32 rounding alone perturbs a central difference at
    eps=1e-3 by ~1e-4 absolute. Pass ``reference_dtype=None`` for a check
    entirely in the working dtype.
    """
    items = list(params)
    for _, t in items:
        t.zero_grad()
    loss = f()
    loss.backward()
    analytic = {name: t.grad.copy() for name, t in items}

    entries = [(name, idx) for name, t in items for idx in np.ndindex(t.shape)]
    if max_entries is not None and len(entries) > max_entries:
        rng = np.random.default_rng(seed)
        pick = np.sort(rng.choice(len(entries), size=max_entries, replace=False))
        entries = [entries[i] for i in pick]

    lookup = dict(items)
    report = GradCheckReport(eps=eps, tol_rel=tol_rel)
    working = {name: t.data for name, t in items}
    if reference_dtype is not None:
        for name, t in items:
            t.data = working[name].astype(reference_dtype)
        with using_dtype(reference_dtype):
            _numeric_pass(f, lookup, entries, analytic, eps, report)
        for name, t in items:
            t.data = working[name]
    else:
        _numeric_pass(f, lookup, entries, analytic, eps, report)
    for _, t in items:
        t.zero_grad()
    return report


def _numeric_pass(f, lookup, entries, analytic, eps, report):
    for name, idx in entries:
        t = lookup[name]
        orig = t.data[idx].copy()
        t.data[idx] = orig + eps
        hi = t.data[idx].copy()
        f_plus = float(f().data)
        t.data[idx] = orig - eps
        lo = t.data[idx].copy()
        f_minus = float(f().data)
        t.data[idx] = orig
        # divide by the step actually representable in the tensor dtype
        numeric = (f_plus - f_minus) / float(hi - lo)
        a = float(analytic[name][idx])
        err = relative_error(a, numeric)
        report.checked += 1
        report.max_rel_error = max(report.max_rel_error, err)
        if err > report.tol_rel:
            report.failures.append(GradCheckEntry(name, idx, a, numeric, err))
