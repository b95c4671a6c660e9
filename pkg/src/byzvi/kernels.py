"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import from the ``BYZVI_BACKEND`` env var:

* ``auto``  (default) -- numba if it imports, numpy otherwise
* ``numba`` -- require numba, fail loudly if missing
* ``numpy`` -- force the vectorized numpy implementations

Both paths compute the same quantities; floating-point summation order
differs between them, so bit-level reproducibility holds only within a
fixed backend.  ``benchmarks/bench_kernels.py`` times one against the
other.
"""

from __future__ import annotations

import logging
import os

import numpy as np

log = logging.getLogger(__name__)

_NJIT_OPTS = dict(cache=True, nogil=True)


# ---------------------------------------------------------------------------
# numpy implementations

def _affine_batch_mean_np(A: np.ndarray, b: np.ndarray, idx: np.ndarray,
                          x: np.ndarray) -> np.ndarray:
    """Mean of A[k] @ x + b[k] over the sampled indices ``idx``."""
    return (A[idx] @ x + b[idx]).mean(axis=0)


def _weiszfeld_np(vs: np.ndarray, iters: int, nu: float) -> np.ndarray:
    """Smoothed Weiszfeld iteration for the geometric median.

    Starts from the arithmetic mean; each pass reweights by
    1/max(nu, ||v_i - z||).
    """
    z = vs.mean(axis=0)
    for _ in range(iters):
        d = np.sqrt(((vs - z) ** 2).sum(axis=1))
        w = 1.0 / np.maximum(nu, d)
        z = (w[:, None] * vs).sum(axis=0) / w.sum()
    return z


def _krum_scores_np(vs: np.ndarray, q: int) -> np.ndarray:
    """Krum score per input: sum of squared distances to its n-q-2 closest."""
    n = vs.shape[0]
    sq = ((vs[:, None, :] - vs[None, :, :]) ** 2).sum(axis=2)
    k = n - q - 2
    scores = np.empty(n)
    for i in range(n):
        others = np.delete(sq[i], i)
        others.sort()
        scores[i] = others[:k].sum()
    return scores


# ---------------------------------------------------------------------------
# numba implementations

def _build_numba():
    from numba import njit

    @njit(**_NJIT_OPTS)
    def affine_batch_mean(A, b, idx, x):
        nb = idx.shape[0]
        d = x.shape[0]
        out = np.zeros(d)
        for t in range(nb):
            k = idx[t]
            for i in range(d):
                s = 0.0
                for j in range(d):
                    s += A[k, i, j] * x[j]
                out[i] += s + b[k, i]
        return out / nb

    @njit(**_NJIT_OPTS)
    def weiszfeld(vs, iters, nu):
        n, d = vs.shape
        z = np.zeros(d)
        for i in range(n):
            for j in range(d):
                z[j] += vs[i, j]
        z /= n
        for _ in range(iters):
            num = np.zeros(d)
            den = 0.0
            for i in range(n):
                s = 0.0
                for j in range(d):
                    diff = vs[i, j] - z[j]
                    s += diff * diff
                dist = np.sqrt(s)
                w = 1.0 / max(nu, dist)
                den += w
                for j in range(d):
                    num[j] += w * vs[i, j]
            z = num / den
        return z

    @njit(**_NJIT_OPTS)
    def krum_scores(vs, q):
        n, d = vs.shape
        sq = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    diff = vs[i, k] - vs[j, k]
                    s += diff * diff
                sq[i, j] = s
                sq[j, i] = s
        keep = n - q - 2
        scores = np.empty(n)
        for i in range(n):
            others = np.empty(n - 1)
            t = 0
            for j in range(n):
                if j != i:
                    others[t] = sq[i, j]
                    t += 1
            others.sort()
            s = 0.0
            for k in range(keep):
                s += others[k]
            scores[i] = s
        return scores

    return affine_batch_mean, weiszfeld, krum_scores


def _select_backend() -> str:
    want = os.environ.get("BYZVI_BACKEND", "auto").lower()
    if want not in ("auto", "numba", "numpy"):
        raise ValueError(f"BYZVI_BACKEND must be auto|numba|numpy, got {want!r}")
    if want == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        if want == "numba":
            raise
        log.warning("numba unavailable, falling back to numpy kernels")
        return "numpy"


BACKEND = _select_backend()

if BACKEND == "numba":
    affine_batch_mean, weiszfeld, krum_scores = _build_numba()
else:
    affine_batch_mean = _affine_batch_mean_np
    weiszfeld = _weiszfeld_np
    krum_scores = _krum_scores_np
