"""Aggregation rules: mean, Krum, coordinate-wise median, RFA, bucketing,
and the univariate trimmed-mean estimator used by the extragradient
variant with per-coordinate trimming.

All rules are pure functions of their inputs (bucketing additionally
takes the permutation generator).  ``aggregate`` composes an optional
bucketing pass with the configured rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AggregationError, ConfigError
from .kernels import krum_scores, weiszfeld

VARIANTS = ("mean", "krum", "cm", "rfa", "trim")


@dataclass(frozen=True)
class AggregatorSpec:
    kind: str = "mean"
    bucket: int = 1          # 1 = no bucketing
    krum_q: int = 0
    rfa_iters: int = 10
    rfa_nu: float = 0.1
    trim_delta: float = 0.01
    trim_pi: float = 0.5

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ConfigError(f"unknown aggregator {self.kind!r}, valid: {VARIANTS}")
        if self.bucket < 1:
            raise ConfigError(f"bucket size must be >= 1, got {self.bucket}")
        if self.kind == "krum" and self.krum_q < 0:
            raise ConfigError("krum_q must be >= 0")
        if self.kind == "rfa" and (self.rfa_iters < 1 or self.rfa_nu <= 0):
            raise ConfigError("rfa needs iters >= 1 and nu > 0")
        if self.kind == "trim":
            if not (0 <= self.trim_delta < 0.5):
                raise ConfigError(f"trim delta must be in [0, 1/2), got {self.trim_delta}")
            if not (0 < self.trim_pi < 1):
                raise ConfigError(f"trim pi must be in (0, 1), got {self.trim_pi}")


def _as_matrix(vs) -> np.ndarray:
    m = np.asarray(vs, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.size == 0:
        raise AggregationError("cannot aggregate an empty list of vectors")
    return m


def mean(vs) -> np.ndarray:
    return _as_matrix(vs).mean(axis=0)


def krum(vs, q: int) -> np.ndarray:
    """The input vector minimizing the sum of squared distances to its
    n-q-2 closest peers; ties break to the lowest index."""
    m = _as_matrix(vs)
    n = m.shape[0]
    if n - q - 2 < 1:
        raise ConfigError(f"krum needs n - q - 2 >= 1, got n={n}, q={q}")
    scores = krum_scores(m, q)
    return m[int(np.argmin(scores))].copy()


def coordinate_median(vs) -> np.ndarray:
    """Per-coordinate median; even counts average the two middle values."""
    return np.median(_as_matrix(vs), axis=0)


def rfa(vs, iters: int = 10, nu: float = 0.1) -> np.ndarray:
    """Smoothed Weiszfeld approximation of the geometric median."""
    if iters < 1 or nu <= 0:
        raise ConfigError("rfa needs iters >= 1 and nu > 0")
    return weiszfeld(_as_matrix(vs), iters, nu)


def bucketing(vs, s: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Randomly permute inputs and replace each group of s by its mean.

    Returns ceil(n/s) vectors; the last group may be smaller.
    """
    m = _as_matrix(vs)
    if s < 1:
        raise ConfigError(f"bucket size must be >= 1, got {s}")
    perm = rng.permutation(m.shape[0])
    return [m[perm[k:k + s]].mean(axis=0) for k in range(0, m.shape[0], s)]


def bucket_size_for(delta: float, delta_max: float) -> int:
    """Theoretical bucket size floor(delta_max / delta) for corruption delta."""
    if not (0 < delta <= delta_max):
        raise ConfigError(f"need 0 < delta <= delta_max, got {delta}, {delta_max}")
    return max(1, math.floor(delta_max / delta))


def trim_epsilon(n: int, delta: float, pi: float) -> float:
    """Trimming level eps = 8*delta + 24*log(4/pi)/n (natural log)."""
    return 8.0 * delta + 24.0 * math.log(4.0 / pi) / n


def _trim_indices(n: int, eps: float) -> tuple[int, int]:
    """1-based quantile order statistics (lo, hi) on a half of size n/2."""
    half = n // 2
    if eps * half < 1 or eps >= 0.5:
        raise AggregationError(
            f"degenerate trim quantiles: eps={eps:.4f} with n={n} "
            f"(need 1 <= eps*n/2 and eps < 1/2)")
    lo = math.ceil(eps * half)
    hi = math.floor((1.0 - eps) * half)
    if not (1 <= lo <= hi <= half):
        raise AggregationError(f"degenerate trim quantiles: lo={lo}, hi={hi}, half={half}")
    return lo, hi


def trimmed_mean(samples, delta: float, pi: float) -> float:
    """Univariate robust mean: learn clip quantiles on the first half of
    the samples, average the clipped second half."""
    z = np.asarray(samples, dtype=np.float64).ravel()
    n = z.size
    if n < 4 or n % 2 != 0:
        raise ConfigError(f"trimmed mean needs an even sample count >= 4, got {n}")
    eps = trim_epsilon(n, delta, pi)
    lo, hi = _trim_indices(n, eps)
    first = np.sort(z[: n // 2])
    gamma, beta = first[lo - 1], first[hi - 1]
    return float(np.clip(z[n // 2:], gamma, beta).mean())


def _trim_vectors(m: np.ndarray, delta: float, pi: float) -> np.ndarray:
    """Per-coordinate trimmed mean over n vectors (n even >= 4)."""
    n = m.shape[0]
    if n < 4 or n % 2 != 0:
        raise ConfigError(f"trim aggregation needs an even input count >= 4, got {n}")
    eps = trim_epsilon(n, delta, pi)
    lo, hi = _trim_indices(n, eps)
    first = np.sort(m[: n // 2], axis=0)
    gamma, beta = first[lo - 1], first[hi - 1]
    return np.clip(m[n // 2:], gamma, beta).mean(axis=0)


def aggregate(spec: AggregatorSpec, vs, rng: np.random.Generator | None = None) -> np.ndarray:
    """Bucketing pass (if configured) followed by the selected rule."""
    m = _as_matrix(vs)
    if spec.bucket > 1:
        if rng is None:
            raise ConfigError("bucketing requires an rng")
        m = np.stack(bucketing(m, spec.bucket, rng))
    if spec.kind == "mean":
        return m.mean(axis=0)
    if spec.kind == "krum":
        return krum(m, spec.krum_q)
    if spec.kind == "cm":
        return coordinate_median(m)
    if spec.kind == "rfa":
        return rfa(m, spec.rfa_iters, spec.rfa_nu)
    return _trim_vectors(m, spec.trim_delta, spec.trim_pi)
