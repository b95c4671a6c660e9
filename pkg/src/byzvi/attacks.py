"""Byzantine strategies and the protocol-violation policy.

A crafted vector is produced from an omniscient view of the round: the
attacker sees every honest submission of the phase before choosing its
own.  Under checks of computations, Byzantines that choose not to
violate submit exactly what a recomputation would produce, so they pass
verification; the policy decides who deviates each round.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rng import Stream, draw_normal, key_stream, pack_key

log = logging.getLogger(__name__)

KINDS = ("none", "bf", "rn", "ipm", "alie")
POLICIES = ("always", "one_per_iteration", "never")


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    scale: float = 100.0      # rn: std of the noise vector
    ipm_eps: float = 0.1      # ipm: negative scaling of the good mean
    z: float = 1.0            # alie: multiples of coordinate-wise std
    policy: str = "always"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown attack {self.kind!r}, valid: {KINDS}")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown violation policy {self.policy!r}, valid: {POLICIES}")
        if self.kind == "rn" and self.scale <= 0:
            raise ConfigError("rn attack needs scale > 0")
        if self.kind == "ipm" and self.ipm_eps <= 0:
            raise ConfigError("ipm attack needs eps > 0")


@dataclass(frozen=True)
class AttackView:
    """What the omniscient adversary sees when crafting one submission."""

    good_values: np.ndarray    # (G, d) honest values of good contributors
    x: np.ndarray              # current iterate of the phase
    honest_self: np.ndarray    # what this worker would submit honestly
    master_seed: int
    worker: int
    round_: int
    phase: int = 0
    attempt: int = 0


def _noise(view: AttackView, scale: float) -> np.ndarray:
    key = pack_key(view.master_seed, Stream.ATTACK, view.worker,
                   view.round_, view.phase, view.attempt)
    return draw_normal(key, view.x.size, scale)


def craft(spec: AttackSpec, view: AttackView) -> np.ndarray:
    """The vector this Byzantine submits when it violates the protocol."""
    if spec.kind == "none":
        return view.honest_self.copy()
    if spec.kind == "bf":
        return -view.honest_self
    if spec.kind == "rn":
        return _noise(view, spec.scale)
    if view.good_values.shape[0] == 0:
        # omniscient statistics unavailable; degrade to unit noise
        log.warning("attack %s has no good submissions in view; falling back to rn(1)",
                    spec.kind)
        return _noise(view, 1.0)
    good_mean = view.good_values.mean(axis=0)
    if spec.kind == "ipm":
        return -spec.ipm_eps * good_mean
    return good_mean - spec.z * view.good_values.std(axis=0)


def violators_this_round(policy: str, byzantine_active: list[int], round_: int,
                         master_seed: int) -> frozenset[int]:
    """Which active Byzantines deviate this round. Non-violators follow
    the protocol exactly (and therefore pass any recomputation check)."""
    if policy not in POLICIES:
        raise ConfigError(f"unknown violation policy {policy!r}")
    if policy == "never" or not byzantine_active:
        return frozenset()
    if policy == "always":
        return frozenset(byzantine_active)
    gen = key_stream(master_seed, Stream.VIOLATOR, 0, round_)
    pick = sorted(byzantine_active)[int(gen.integers(0, len(byzantine_active)))]
    return frozenset((pick,))
