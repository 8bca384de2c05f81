"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

The inner loops that dominate a corpus evaluation — paired cosine means over
frame embeddings, prefix maxima over score traces, and synthetic frame
rendering — live here. Each kernel has two implementations:

* a numba ``@njit`` version (compiled lazily, cached on disk), and
* a pure-numpy version producing the same results.

Backend selection is controlled by the ``CLIPSCRIPT_NUMBA`` environment
variable read at import time: ``0`` / ``off`` / ``numpy`` forces the numpy
path; anything else (including unset) uses numba when importable. The active
choice is exposed as ``BACKEND``; both implementations stay importable via
``IMPLEMENTATIONS`` so tests and ``benchmarks/bench_kernels.py`` can compare
them directly.

Frame rendering is integer-only arithmetic so the two backends are
byte-identical (rendered media is content-addressed; the digest must not
depend on the backend). Floating-point kernels may differ between backends at
machine-epsilon level due to summation order, which every caller tolerance
absorbs.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "BACKEND",
    "IMPLEMENTATIONS",
    "cosine_raw",
    "paired_mean_cosine",
    "prefix_max",
    "prefix_max_rows",
    "render_body",
]


# --------------------------------------------------------------------------
# Pure numpy implementations
# --------------------------------------------------------------------------


def _cosine_raw_np(u: np.ndarray, v: np.ndarray) -> float:
    """Unclamped cosine of two 1-D float64 vectors. Norm handling is the
    caller's job; returns nan on zero norms."""
    dot = float(np.dot(u, v))
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    return dot / (nu * nv)


def _paired_mean_cosine_np(a: np.ndarray, b: np.ndarray) -> float:
    """Mean cosine over row pairs of two (n, d) float64 matrices."""
    dots = np.einsum("ij,ij->i", a, b)
    na = np.sqrt(np.einsum("ij,ij->i", a, a))
    nb = np.sqrt(np.einsum("ij,ij->i", b, b))
    return float(np.mean(dots / (na * nb)))


def _prefix_max_np(x: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(x)


def _prefix_max_rows_np(m: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(m, axis=1)


def _render_body_np(height: int, width: int, p: np.ndarray) -> np.ndarray:
    """Decorative frame body from the integer parameter vector ``p``.

    Layout of ``p`` (int64): 0 gx, 1 gy, 2 phase, 3-5 gradient color A,
    6-8 gradient color B, 9-11 subject color, 12 cx, 13 cy, 14 radius^2,
    15 noise multiplier, 16 noise mask.
    """
    y = np.arange(height, dtype=np.int64)[:, None]
    x = np.arange(width, dtype=np.int64)[None, :]
    u = (x * p[0] + y * p[1] + p[2]) & 255
    inv = 255 - u
    out = np.empty((height, width, 3), dtype=np.uint8)
    noise = ((x * 73 + y * 151 + p[2] * 29) * p[15]) & p[16]
    dx = x - p[12]
    dy = y - p[13]
    blob = (dx * dx + dy * dy) <= p[14]
    for c in range(3):
        chan = (p[3 + c] * inv + p[6 + c] * u) // 255
        chan = np.where(blob, p[9 + c], chan)
        out[:, :, c] = np.minimum(chan + noise, 255).astype(np.uint8)
    return out


# --------------------------------------------------------------------------
# numba implementations (optional)
# --------------------------------------------------------------------------

_env = os.environ.get("CLIPSCRIPT_NUMBA", "auto").strip().lower()
_numba_impls = None

if _env not in {"0", "off", "false", "numpy"}:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - exercised only without numba
        njit = None

    if njit is not None:

        @njit(cache=True, nogil=True)
        def _cosine_raw_nb(u, v):
            dot = 0.0
            nu = 0.0
            nv = 0.0
            for i in range(u.shape[0]):
                dot += u[i] * v[i]
                nu += u[i] * u[i]
                nv += v[i] * v[i]
            return dot / (math.sqrt(nu) * math.sqrt(nv))

        @njit(cache=True, nogil=True)
        def _paired_mean_cosine_nb(a, b):
            acc = 0.0
            for i in range(a.shape[0]):
                dot = 0.0
                na = 0.0
                nb = 0.0
                for j in range(a.shape[1]):
                    dot += a[i, j] * b[i, j]
                    na += a[i, j] * a[i, j]
                    nb += b[i, j] * b[i, j]
                acc += dot / (math.sqrt(na) * math.sqrt(nb))
            return acc / a.shape[0]

        @njit(cache=True, nogil=True)
        def _prefix_max_nb(x):
            out = np.empty_like(x)
            best = x[0]
            for i in range(x.shape[0]):
                if x[i] > best:
                    best = x[i]
                out[i] = best
            return out

        @njit(cache=True, nogil=True)
        def _prefix_max_rows_nb(m):
            out = np.empty_like(m)
            for t in range(m.shape[0]):
                best = m[t, 0]
                for i in range(m.shape[1]):
                    if m[t, i] > best:
                        best = m[t, i]
                    out[t, i] = best
            return out

        @njit(cache=True, nogil=True)
        def _render_body_nb(height, width, p):
            out = np.empty((height, width, 3), dtype=np.uint8)
            for y in range(height):
                for x in range(width):
                    u = (x * p[0] + y * p[1] + p[2]) & 255
                    inv = 255 - u
                    noise = ((x * 73 + y * 151 + p[2] * 29) * p[15]) & p[16]
                    dx = x - p[12]
                    dy = y - p[13]
                    blob = dx * dx + dy * dy <= p[14]
                    for c in range(3):
                        if blob:
                            chan = p[9 + c]
                        else:
                            chan = (p[3 + c] * inv + p[6 + c] * u) // 255
                        val = chan + noise
                        if val > 255:
                            val = 255
                        out[y, x, c] = np.uint8(val)
            return out

        def _cosine_raw_jit(u: np.ndarray, v: np.ndarray) -> float:
            return float(_cosine_raw_nb(u, v))

        def _paired_mean_cosine_jit(a: np.ndarray, b: np.ndarray) -> float:
            return float(_paired_mean_cosine_nb(a, b))

        def _render_body_jit(height: int, width: int, p: np.ndarray) -> np.ndarray:
            return _render_body_nb(height, width, p)

        _numba_impls = {
            "cosine_raw": _cosine_raw_jit,
            "paired_mean_cosine": _paired_mean_cosine_jit,
            "prefix_max": _prefix_max_nb,
            "prefix_max_rows": _prefix_max_rows_nb,
            "render_body": _render_body_jit,
        }

_numpy_impls = {
    "cosine_raw": _cosine_raw_np,
    "paired_mean_cosine": _paired_mean_cosine_np,
    "prefix_max": _prefix_max_np,
    "prefix_max_rows": _prefix_max_rows_np,
    "render_body": _render_body_np,
}

IMPLEMENTATIONS = {"numpy": _numpy_impls, "numba": _numba_impls}

if _numba_impls is not None:
    BACKEND = "numba"
    _active = _numba_impls
else:
    BACKEND = "numpy"
    _active = _numpy_impls

cosine_raw = _active["cosine_raw"]
paired_mean_cosine = _active["paired_mean_cosine"]
prefix_max = _active["prefix_max"]
prefix_max_rows = _active["prefix_max_rows"]
render_body = _active["render_body"]
