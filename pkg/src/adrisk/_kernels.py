"""Numeric hot loops with a numba backend and a pure-numpy fallback.

Set ``ADRISK_NUMBA=0`` to force the numpy implementations (useful where numba
is unavailable or when comparing backends). The choice is made at import time;
:func:`set_backend` switches it afterwards, mainly for benchmarks and tests.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def _env_wants_numba() -> bool:
    return os.environ.get("ADRISK_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def propagate_numpy(
    indptr: np.ndarray,
    indices: np.ndarray,
    data: np.ndarray,
    start: np.ndarray,
    mask: np.ndarray,
    steps: int,
) -> np.ndarray:
    """Labelled mass after 0..steps synchronous steps of a CSR chain."""
    n = start.shape[0]
    rows = np.repeat(np.arange(n), np.diff(indptr))
    v = start.astype(np.float64).copy()
    out = np.empty(steps + 1)
    out[0] = v[mask].sum()
    for k in range(1, steps + 1):
        v = np.bincount(indices, weights=v[rows] * data, minlength=n)
        out[k] = v[mask].sum()
    return out


def batch_moments_numpy(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column sums and sums of squares of a (runs x cells) matrix."""
    return values.sum(axis=0), (values * values).sum(axis=0)


if HAVE_NUMBA:

    @njit(cache=False)
    def _propagate_jit(indptr, indices, data, start, mask, steps):  # pragma: no cover - jitted
        n = start.shape[0]
        v = start.astype(np.float64).copy()
        w = np.zeros(n)
        out = np.empty(steps + 1)
        acc = 0.0
        for i in range(n):
            if mask[i]:
                acc += v[i]
        out[0] = acc
        for k in range(1, steps + 1):
            for i in range(n):
                w[i] = 0.0
            for i in range(n):
                vi = v[i]
                if vi == 0.0:
                    continue
                for p in range(indptr[i], indptr[i + 1]):
                    w[indices[p]] += vi * data[p]
            v, w = w, v
            acc = 0.0
            for i in range(n):
                if mask[i]:
                    acc += v[i]
            out[k] = acc
        return out

    @njit(cache=False)
    def _moments_jit(values):  # pragma: no cover - jitted
        runs, cells = values.shape
        s = np.zeros(cells)
        s2 = np.zeros(cells)
        for r in range(runs):
            for c in range(cells):
                x = values[r, c]
                s[c] += x
                s2[c] += x * x
        return s, s2


_use_numba = HAVE_NUMBA and _env_wants_numba()


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` explicitly."""
    global _use_numba
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        _use_numba = True
    elif name == "numpy":
        _use_numba = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend() -> str:
    return "numba" if _use_numba else "numpy"


def propagate(
    indptr: np.ndarray,
    indices: np.ndarray,
    data: np.ndarray,
    start: np.ndarray,
    mask: np.ndarray,
    steps: int,
) -> np.ndarray:
    if _use_numba:
        return _propagate_jit(
            indptr.astype(np.int64),
            indices.astype(np.int64),
            data.astype(np.float64),
            start.astype(np.float64),
            mask.astype(np.bool_),
            int(steps),
        )
    return propagate_numpy(indptr, indices, data, start, mask, steps)


def batch_moments(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values = np.ascontiguousarray(values, dtype=np.float64)
    if _use_numba and values.size:
        return _moments_jit(values)
    return batch_moments_numpy(values)
