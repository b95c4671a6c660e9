"""Simulated worker fleet: honest oracle computations per phase, crafted
Byzantine submissions, and the bounded history that lets checkers
re-derive any past submission from its rng key.

Gradient computations inside a phase are independent; BYZVI_THREADS > 1
fans them out to a thread pool.  Determinism is carried by the rng keys,
not by execution order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import attacks, core
from .attacks import AttackSpec, AttackView
from .errors import ConfigError, ProtocolError
from .game import QuadraticGame

_HISTORY_DEPTH = 4  # phases retained for recomputation (SEG needs 2/round)


@dataclass
class PhaseRecord:
    x: np.ndarray
    attempt: int
    submissions: dict[int, np.ndarray]


class Cluster:
    """n workers over one problem instance under one attack spec."""

    def __init__(self, game: QuadraticGame, n: int, byz_ids, attack: AttackSpec,
                 batch: int, master_seed: int, mode: str = "homogeneous",
                 exhaustive: bool = False):
        if mode not in ("homogeneous", "heterogeneous"):
            raise ConfigError(f"unknown data mode {mode!r}")
        self.game = game
        self.n = n
        self.byz = frozenset(int(i) for i in byz_ids)
        self.good = frozenset(range(n)) - self.byz
        if not self.good:
            raise ConfigError("need at least one good worker")
        self.attack = attack
        self.batch = batch
        self.master_seed = master_seed
        self.mode = mode
        self.exhaustive = exhaustive
        self.oracle_calls = 0
        # good workers own disjoint shards; Byzantines are outside the mean
        # operator's definition and sample the full pool for honest values
        self._shards: dict[int, np.ndarray] = {}
        if mode == "heterogeneous":
            self._shards = core.shard_indices(game.s, sorted(self.good))
        self._history: dict[tuple[int, int], PhaseRecord] = {}
        threads = int(os.environ.get("BYZVI_THREADS", "1") or "1")
        self._pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    # -- honest computation ------------------------------------------------

    def honest_value(self, worker: int, x: np.ndarray, round_: int, phase: int,
                     attempt: int = 0) -> np.ndarray:
        return core.sample_worker_gradient(
            self.game, x, worker, self.batch, self.master_seed, round_, phase,
            attempt, self._shards.get(worker), self.exhaustive)

    def honest_phase(self, x: np.ndarray, round_: int, phase: int, attempt: int,
                     ids) -> dict[int, np.ndarray]:
        """Honest oracle values for every listed worker (Byzantines included:
        this is the value a recomputation of them would produce)."""
        ids = sorted(ids)
        x = core.check_point(x, self.game.d)
        if self._pool is not None:
            vals = list(self._pool.map(
                lambda w: self.honest_value(w, x, round_, phase, attempt), ids))
            out = dict(zip(ids, vals))
        else:
            out = {w: self.honest_value(w, x, round_, phase, attempt) for w in ids}
        per_call = self.game.s if self.exhaustive else self.batch
        self.oracle_calls += per_call * sum(1 for w in ids if w in self.good)
        return out

    # -- Byzantine behaviour -------------------------------------------------

    def violators(self, round_: int, candidates) -> frozenset[int]:
        byz_active = sorted(self.byz & set(candidates))
        return attacks.violators_this_round(self.attack.policy, byz_active,
                                            round_, self.master_seed)

    def attack_submissions(self, values: dict[int, np.ndarray], x: np.ndarray,
                           round_: int, phase: int, attempt: int,
                           violators) -> dict[int, np.ndarray]:
        """Replace violators' entries with crafted vectors; everyone else
        submits their honest value."""
        goods = [values[i] for i in sorted(values) if i in self.good]
        good_stack = (np.stack(goods) if goods
                      else np.empty((0, self.game.d)))
        out = dict(values)
        for w in sorted(violators):
            if w not in values:
                continue
            view = AttackView(good_values=good_stack, x=x,
                              honest_self=values[w],
                              master_seed=self.master_seed, worker=w,
                              round_=round_, phase=phase, attempt=attempt)
            out[w] = attacks.craft(self.attack, view)
        return out

    # -- history for checks ---------------------------------------------------

    def record_phase(self, round_: int, phase: int, x: np.ndarray, attempt: int,
                     submissions: dict[int, np.ndarray]) -> None:
        self._history[(round_, phase)] = PhaseRecord(x=x.copy(), attempt=attempt,
                                                     submissions=dict(submissions))
        while len(self._history) > _HISTORY_DEPTH:
            del self._history[min(self._history)]

    def stored_submission(self, worker: int, round_: int, phase: int) -> np.ndarray:
        rec = self._history.get((round_, phase))
        if rec is None or worker not in rec.submissions:
            raise ProtocolError(f"no stored submission for worker {worker} "
                                f"at round {round_} phase {phase}")
        return rec.submissions[worker]

    def recompute_submission(self, worker: int, round_: int, phase: int) -> np.ndarray:
        """Deterministically re-run a worker's sampling for a past phase."""
        rec = self._history.get((round_, phase))
        if rec is None:
            raise ProtocolError(f"history for round {round_} phase {phase} "
                                "is no longer retained")
        return self.honest_value(worker, rec.x, round_, phase, rec.attempt)
