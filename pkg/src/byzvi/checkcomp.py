"""Check-of-computations protocol pieces: acceptance of the averaged
gradient, random checker/checked pairing, deterministic recomputation,
and roster updates that ban mismatched pairs.

The server knows every worker's rng key, so a checker can re-run the
checked worker's sampling bit-for-bit; any deviation from the protocol
is therefore observable one round later.  Banning a mismatched pair
removes at least one Byzantine and at most one honest worker per event.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, ProtocolError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WorkerRoster:
    n: int
    good: frozenset[int]
    byz: frozenset[int]
    m: int
    banned: frozenset[int] = field(default_factory=frozenset)
    checking: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.good & self.byz:
            raise ConfigError("good and Byzantine sets overlap")
        if self.good | self.byz != frozenset(range(self.n)):
            raise ConfigError("good and Byzantine sets must partition the workers")
        if self.m < 0:
            raise ConfigError("checker count m must be >= 0")

    @classmethod
    def create(cls, n: int, byz_ids, m: int) -> "WorkerRoster":
        byz = frozenset(int(i) for i in byz_ids)
        return cls(n=n, good=frozenset(range(n)) - byz, byz=byz, m=m)

    @property
    def active(self) -> tuple[int, ...]:
        """Workers that contribute gradients this round (not banned, not checking)."""
        return tuple(sorted(frozenset(range(self.n)) - self.banned - self.checking))

    @property
    def banned_byz(self) -> int:
        return len(self.banned & self.byz)

    @property
    def banned_good(self) -> int:
        return len(self.banned & self.good)


@dataclass(frozen=True)
class CheckConfig:
    radius: float = 10.0      # C in the acceptance test ||g_bar - g_i|| <= C*sigma
    sigma: float = 0.0
    max_resamples: int = 100

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError("acceptance radius multiplier must be > 0")
        if self.sigma < 0:
            raise ConfigError("sigma must be >= 0")
        if self.max_resamples < 1:
            raise ConfigError("max_resamples must be >= 1")

    def q_value(self, n: int, B: int, m: int) -> float:
        """Aggregation-error constant q = 2C^2 + 12 + 12/(n - 2B - m)."""
        slack = n - 2 * B - m
        if slack < 1:
            raise ConfigError(f"need n - 2B - m >= 1, got {slack}")
        return 2.0 * self.radius ** 2 + 12.0 + 12.0 / slack


def accept_candidate(g_bar: np.ndarray, reports: list[tuple[int, np.ndarray]],
                     cfg: CheckConfig) -> bool:
    """Accept iff at least half the reports lie within C*sigma of the mean.

    A machine-epsilon cushion keeps the sigma=0 (deterministic) case from
    rejecting over the rounding of the mean itself.
    """
    if not reports:
        raise ProtocolError("acceptance test needs at least one report")
    tol = cfg.radius * cfg.sigma + 64 * np.finfo(float).eps * max(1.0, float(np.linalg.norm(g_bar)))
    inside = sum(1 for _, g in reports if np.linalg.norm(g_bar - g) <= tol)
    return 2 * inside >= len(reports)


def select_check_pairs(active: list[int], m: int, rng: np.random.Generator,
                       ) -> tuple[list[int], list[int]]:
    """Draw 2m distinct workers uniformly; first m check the last m.

    With fewer than 2m active workers the protocol degrades to
    floor(|active|/2) pairs.
    """
    avail = sorted(active)
    m_eff = min(m, len(avail) // 2)
    if m_eff < m:
        log.warning("only %d active workers, degrading to m=%d checks", len(avail), m_eff)
    if m_eff == 0:
        return [], []
    picked = rng.choice(len(avail), size=2 * m_eff, replace=False)
    ids = [avail[k] for k in picked]
    return ids[:m_eff], ids[m_eff:]


def verify(checked_id: int, round_: int, phase: int, reported: np.ndarray,
           world) -> bool:
    """Recompute the checked worker's submission from its rng key; match
    iff bit-identical.  ``world`` must retain the round's iterate and
    keys (`recompute_submission`)."""
    recomputed = world.recompute_submission(checked_id, round_, phase)
    return bool(np.array_equal(recomputed, reported))


def update_roster(roster: WorkerRoster, mismatched_pairs: list[tuple[int, int]],
                  new_checking=()) -> WorkerRoster:
    """Ban both members of every mismatched pair and install the next
    checking set; previous checkers rejoin the active pool."""
    banned = set(roster.banned)
    for pair in mismatched_pairs:
        banned.update(pair)
    return replace(roster, banned=frozenset(banned),
                   checking=frozenset(new_checking))
