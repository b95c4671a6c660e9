"""Core operator abstractions: exact evaluation, stochastic oracles, metrics.

All functions are pure given their inputs; oracles draw through
hierarchical rng keys so any draw can be reproduced bit-for-bit from
``(master_seed, worker, round, phase, attempt)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .game import QuadraticGame
from .kernels import affine_batch_mean
from .rng import Stream, draw_integers, key_stream, pack_key


def check_point(x: np.ndarray, d: int | None = None) -> np.ndarray:
    """Validate an iterate: finite entries, even dimension >= 2."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2 or x.size % 2 != 0:
        raise ConfigError(f"point must be 1-d with even size >= 2, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ConfigError("point has non-finite entries")
    if d is not None and x.size != d:
        raise ConfigError(f"dimension mismatch: point has {x.size}, problem has {d}")
    return x


def distance_sq(x: np.ndarray, x_star: np.ndarray) -> float:
    """Squared euclidean distance, the error metric for all experiments."""
    x = np.asarray(x, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x.shape != x_star.shape:
        raise ConfigError(f"dimension mismatch: {x.shape} vs {x_star.shape}")
    diff = x - x_star
    return float(diff @ diff)


def evaluate_full(game: QuadraticGame, x: np.ndarray) -> np.ndarray:
    """Exact mean operator value (1/s) sum_i A_i x + b_i."""
    x = check_point(x, game.d)
    return affine_batch_mean(game.A, game.b, np.arange(game.s), x)


@dataclass(frozen=True)
class OracleView:
    """One worker's window onto the stochastic oracle for one phase.

    ``key`` is the full rng key (master_seed, worker, round, phase,
    attempt); equal views at equal x produce bit-identical samples.
    ``pool`` restricts sampling to an index shard (heterogeneous mode);
    None means all s operators.  ``exhaustive`` replaces sampling by the
    full deterministic mean over the pool.
    """

    game: QuadraticGame
    worker: int
    batch: int
    master_seed: int
    round_: int = 0
    phase: int = 0
    attempt: int = 0
    pool: np.ndarray | None = None
    exhaustive: bool = False

    def __post_init__(self):
        if self.batch < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch}")


def sample_worker_gradient(game: QuadraticGame, x: np.ndarray, worker: int,
                           batch: int, master_seed: int, round_: int = 0,
                           phase: int = 0, attempt: int = 0,
                           pool: np.ndarray | None = None,
                           exhaustive: bool = False) -> np.ndarray:
    """Keyed mini-batch oracle draw; the hot path (no input validation)."""
    if exhaustive:
        idx = pool if pool is not None else np.arange(game.s)
    else:
        key = pack_key(master_seed, Stream.GRAD, worker, round_, phase, attempt)
        idx = draw_integers(key, game.s if pool is None else pool.size, batch)
        if pool is not None:
            idx = pool[idx]
    return affine_batch_mean(game.A, game.b, idx, x)


def sample_stochastic(view: OracleView, x: np.ndarray) -> np.ndarray:
    """Mini-batch operator estimate: mean of ``batch`` with-replacement draws."""
    x = check_point(x, view.game.d)
    return sample_worker_gradient(view.game, x, view.worker, view.batch,
                                  view.master_seed, view.round_, view.phase,
                                  view.attempt, view.pool, view.exhaustive)


def shard_indices(s: int, workers: list[int]) -> dict[int, np.ndarray]:
    """Round-robin partition of operator indices across the given workers."""
    if not workers:
        raise ConfigError("cannot shard across zero workers")
    return {w: np.arange(k, s, len(workers)) for k, w in enumerate(workers)}


def estimate_sigma(game: QuadraticGame, x0: np.ndarray, n_samples: int,
                   master_seed: int = 0) -> float:
    """Root-mean-square of ||g(x0) - F(x0)|| over single-sample draws.

    This is the per-sample noise level the check-of-computations
    acceptance radius is calibrated against.
    """
    if n_samples < 2:
        raise ConfigError(f"need n_samples >= 2, got {n_samples}")
    x0 = check_point(x0, game.d)
    full = evaluate_full(game, x0)
    gen = key_stream(master_seed, Stream.SIGMA)
    idx = gen.integers(0, game.s, size=n_samples)
    devs = game.A[idx] @ x0 + game.b[idx] - full
    return float(np.sqrt((devs ** 2).sum(axis=1).mean()))


@dataclass
class ProblemInfo:
    """Constants of a generated problem as used by methods and schedules."""

    mu: float
    ell: float
    L: float
    sigma: float
    zeta: float

    def __post_init__(self):
        if not (0 < self.mu <= self.ell):
            raise ConfigError(f"need 0 < mu <= ell, got {self.mu}, {self.ell}")
        if self.sigma < 0 or self.zeta < 0:
            raise ConfigError("sigma and zeta must be non-negative")


def problem_info(game: QuadraticGame, sigma: float, zeta: float = 0.0) -> ProblemInfo:
    # the affine game is exactly ell-smooth blockwise; L = ell by convention
    return ProblemInfo(mu=game.mu, ell=game.ell, L=game.ell, sigma=sigma, zeta=zeta)
