"""Optimization methods over a simulated cluster.

Robust-aggregation family (every Byzantine attacks every round; there is
no detection mechanism to evade):

* descent-ascent step through a robust aggregator
* extragradient step (two independent sampling phases)
* worker-momentum variant with exponentially-averaged iterates
* extragradient with per-coordinate trimmed-mean aggregation

Check-of-computations family (homogeneous data; the mean is accepted
only when most workers sit inside the C*sigma radius, and randomly
chosen checkers re-run peers' sampling one round later, banning
mismatched pairs):

* descent-ascent and extragradient steps with the full accept /
  resample / verify / ban cycle
* stagewise restart schedules that halve the squared error per stage
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import checkcomp
from .aggregators import AggregatorSpec, aggregate
from .checkcomp import CheckConfig, WorkerRoster, accept_candidate, select_check_pairs
from .errors import ConfigError, ProtocolError
from .rng import Stream, key_stream
from .world import Cluster

log = logging.getLogger(__name__)

KINDS = ("sgda-ra", "seg-ra", "m-sgda-ra", "rdeg", "sgda-cc", "seg-cc",
         "r-sgda-cc", "r-seg-cc")


@dataclass(frozen=True)
class MethodSpec:
    kind: str
    gamma: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    alpha: float = 1.0
    eps_target: float = 0.0
    r_bound: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown method {self.kind!r}, valid: {KINDS}")
        if not (0 < self.alpha <= 1):
            raise ConfigError(f"momentum alpha must be in (0, 1], got {self.alpha}")
        if self.kind in ("seg-ra", "seg-cc", "rdeg") and self.gamma1 > 0:
            beta = self.gamma2 / self.gamma1
            if beta > 0.25:
                log.warning("stepsize ratio gamma2/gamma1 = %.3f exceeds 1/4", beta)


@dataclass
class StepStats:
    accepted: bool = True
    resamples: int = 0
    violations: int = 0


class IterateAveraging:
    """Exponential window over iterates plus a weighted outer average.

    The window average with parameter alpha is
    (alpha / (1 - (1-alpha)^(t+1))) * sum_j (1-alpha)^(t-j) x^j; the
    outer average weights window averages by w_t = ratio^(-t-1).
    """

    def __init__(self, d: int, alpha: float, weight_ratio: float = 1.0):
        if not (0 < alpha <= 1):
            raise ConfigError(f"alpha must be in (0, 1], got {alpha}")
        if not (0 < weight_ratio <= 1):
            raise ConfigError(
                f"averaging weight ratio must be in (0, 1], got {weight_ratio}; "
                "mu*gamma*alpha must stay below 2")
        self.alpha = alpha
        self.ratio = weight_ratio
        self.t = -1
        self._window_num = np.zeros(d)
        self._outer_num = np.zeros(d)
        self._outer_den = 0.0
        self._w = 1.0
        self.x_hat = np.zeros(d)

    def push(self, x: np.ndarray) -> None:
        self.t += 1
        self._window_num = (1.0 - self.alpha) * self._window_num + x
        scale = self.alpha / (1.0 - (1.0 - self.alpha) ** (self.t + 1))
        self.x_hat = scale * self._window_num
        self._w /= self.ratio
        if self._w > 1e290:  # keep relative weights, avoid overflow
            self._outer_num /= self._w
            self._outer_den /= self._w
            self._w = 1.0
        self._outer_num += self._w * self.x_hat
        self._outer_den += self._w

    @property
    def x_bar(self) -> np.ndarray:
        if self.t < 0:
            raise ProtocolError("no iterates accumulated yet")
        return self._outer_num / self._outer_den


def averaged_iterates(state) -> tuple[np.ndarray, np.ndarray]:
    """(window average, weighted outer average) of a momentum-method state."""
    return state.averaging.x_hat.copy(), state.averaging.x_bar


# ---------------------------------------------------------------------------
# robust-aggregation family


class _RABase:
    """Common plumbing: all workers submit, Byzantines always attack."""

    def __init__(self, cluster: Cluster, x0: np.ndarray, order_rng=None):
        self.cluster = cluster
        self.x = np.asarray(x0, dtype=np.float64).copy()
        self.t = 0
        # order_rng permutes the submission list each round (used to probe
        # permutation invariance); None keeps worker-id order
        self.order_rng = order_rng

    def _submission_list(self, subs: dict[int, np.ndarray]) -> list[np.ndarray]:
        ids = sorted(subs)
        if self.order_rng is not None:
            ids = [ids[k] for k in self.order_rng.permutation(len(ids))]
        return [subs[i] for i in ids]

    def _phase(self, x_eval: np.ndarray, phase: int) -> tuple[dict, int]:
        ids = range(self.cluster.n)
        honest = self.cluster.honest_phase(x_eval, self.t, phase, 0, ids)
        violators = frozenset() if self.cluster.attack.kind == "none" \
            else self.cluster.byz
        subs = self.cluster.attack_submissions(honest, x_eval, self.t, phase, 0,
                                               violators)
        return subs, len(violators)

    def _bucket_rng(self, phase: int):
        return key_stream(self.cluster.master_seed, Stream.BUCKET, 0, self.t, phase)


class SgdaRA(_RABase):
    def __init__(self, spec: MethodSpec, agg: AggregatorSpec, cluster: Cluster,
                 x0: np.ndarray, order_rng=None):
        super().__init__(cluster, x0, order_rng)
        self.gamma = spec.gamma
        self.agg = agg

    def step(self) -> StepStats:
        subs, nviol = self._phase(self.x, 0)
        g_hat = aggregate(self.agg, self._submission_list(subs), self._bucket_rng(0))
        self.x = self.x - self.gamma * g_hat
        self.t += 1
        return StepStats(violations=nviol)


class SegRA(_RABase):
    def __init__(self, spec: MethodSpec, agg: AggregatorSpec, cluster: Cluster,
                 x0: np.ndarray, order_rng=None):
        super().__init__(cluster, x0, order_rng)
        self.gamma1 = spec.gamma1
        self.gamma2 = spec.gamma2
        self.agg = agg
        self.x_tilde = self.x.copy()

    def step(self) -> StepStats:
        subs_xi, nviol = self._phase(self.x, 0)
        g_xi = aggregate(self.agg, self._submission_list(subs_xi), self._bucket_rng(0))
        self.x_tilde = self.x - self.gamma1 * g_xi
        subs_eta, nviol2 = self._phase(self.x_tilde, 1)
        g_eta = aggregate(self.agg, self._submission_list(subs_eta), self._bucket_rng(1))
        self.x = self.x - self.gamma2 * g_eta
        self.t += 1
        return StepStats(violations=nviol + nviol2)


class MSgdaRA(_RABase):
    def __init__(self, spec: MethodSpec, agg: AggregatorSpec, cluster: Cluster,
                 x0: np.ndarray, mu: float, order_rng=None):
        super().__init__(cluster, x0, order_rng)
        self.gamma = spec.gamma
        self.alpha = spec.alpha
        self.agg = agg
        ratio = 1.0 - mu * spec.gamma * spec.alpha / 2.0
        if ratio <= 0:
            raise ConfigError(
                f"mu*gamma*alpha = {mu * spec.gamma * spec.alpha:.3g} >= 2 "
                "makes the averaging weights invalid")
        self.averaging = IterateAveraging(self.x.size, spec.alpha, ratio)
        # m^{-1} = 0 for everyone; Byzantine entries track the momentum the
        # worker would hold had it been honest
        self.momenta = {i: np.zeros(self.x.size) for i in range(cluster.n)}

    def step(self) -> StepStats:
        ids = range(self.cluster.n)
        honest = self.cluster.honest_phase(self.x, self.t, 0, 0, ids)
        for i in ids:
            self.momenta[i] = (1.0 - self.alpha) * self.momenta[i] \
                + self.alpha * honest[i]
        violators = frozenset() if self.cluster.attack.kind == "none" \
            else self.cluster.byz
        subs = self.cluster.attack_submissions(dict(self.momenta), self.x,
                                               self.t, 0, 0, violators)
        m_hat = aggregate(self.agg, self._submission_list(subs), self._bucket_rng(0))
        self.averaging.push(self.x)
        self.x = self.x - self.gamma * m_hat
        self.t += 1
        return StepStats(violations=len(violators))


class Rdeg(SegRA):
    """Extragradient with per-coordinate trimmed-mean aggregation in both
    sampling phases."""

    def __init__(self, spec: MethodSpec, agg: AggregatorSpec, cluster: Cluster,
                 x0: np.ndarray, order_rng=None):
        if agg.kind != "trim":
            raise ConfigError("this method requires the trim aggregator")
        if cluster.n % 2 != 0:
            raise ConfigError(f"trim aggregation needs an even worker count, got {cluster.n}")
        floor_pi = 4.0 * math.exp(-cluster.n / 2.0)
        if agg.trim_pi < floor_pi:
            log.warning("trim confidence pi=%.3g below the 4*exp(-n/2)=%.3g floor",
                        agg.trim_pi, floor_pi)
        super().__init__(spec, agg, cluster, x0, order_rng)


# ---------------------------------------------------------------------------
# check-of-computations family


class _CCBase:
    """Accept/resample the plain mean, then verify last slot's pairs and
    rotate a fresh set of checkers in."""

    def __init__(self, cluster: Cluster, roster: WorkerRoster, check: CheckConfig,
                 x0: np.ndarray):
        if roster.n != cluster.n or roster.byz != cluster.byz:
            raise ConfigError("roster and cluster disagree on the worker split")
        self.cluster = cluster
        self.roster = roster
        self.check = check
        self.x = np.asarray(x0, dtype=np.float64).copy()
        self.t = 0
        # pairs assigned at the end of the previous slot, verified now
        self._pending: tuple[list[tuple[int, int]], int, int] | None = None
        self.framed_good = 0

    def reset_to(self, x0: np.ndarray) -> None:
        self.x = np.asarray(x0, dtype=np.float64).copy()

    # -- one accepted mean ---------------------------------------------------

    def _accepted_mean(self, x_eval: np.ndarray, round_: int, phase: int,
                       contributors, violators, stats: StepStats) -> np.ndarray:
        for attempt in range(self.check.max_resamples):
            honest = self.cluster.honest_phase(x_eval, round_, phase, attempt,
                                               contributors)
            subs = self.cluster.attack_submissions(honest, x_eval, round_, phase,
                                                   attempt, violators)
            ordered = [subs[i] for i in contributors]
            g_bar = np.mean(ordered, axis=0)
            if accept_candidate(g_bar, [(i, subs[i]) for i in contributors],
                                self.check):
                self.cluster.record_phase(round_, phase, x_eval, attempt, subs)
                return g_bar
            stats.resamples += 1
        raise ProtocolError(
            f"mean rejected {self.check.max_resamples} times at round {round_} "
            f"phase {phase}; aborting")

    # -- verification and rotation --------------------------------------------

    def _checker_reports_match(self, checker: int, checked: int, truthful: bool) -> bool:
        byz = self.cluster.byz
        if checker in byz:
            if checked in byz:
                return True   # omniscient cover-up: echo the stored submission
            if self.cluster.attack.policy == "always" \
                    and self.cluster.attack.kind != "none":
                return False  # frame the honest worker
        return truthful

    def _verify_and_rotate(self, round_: int, phase: int, contributors) -> None:
        mismatched: list[tuple[int, int]] = []
        if self._pending is not None:
            pairs, prnd, pphase = self._pending
            for checker, checked in pairs:
                reported = self.cluster.stored_submission(checked, prnd, pphase)
                truthful = checkcomp.verify(checked, prnd, pphase, reported,
                                            self.cluster)
                if not self._checker_reports_match(checker, checked, truthful):
                    mismatched.append((checker, checked))
                    if checked in self.cluster.good:
                        self.framed_good += 1
        roster = checkcomp.update_roster(self.roster, mismatched, new_checking=())
        pool = [i for i in contributors if i not in roster.banned]
        rng = key_stream(self.cluster.master_seed, Stream.CHECK, 0, round_, phase)
        checkers, checked = select_check_pairs(pool, roster.m, rng)
        self.roster = replace(roster, checking=frozenset(checkers))
        self._pending = (list(zip(checkers, checked)), round_, phase) \
            if checkers else None

    def _contributors(self) -> tuple[int, ...]:
        contributors = self.roster.active
        if not contributors:
            raise ProtocolError("no active workers left to continue the run")
        return contributors


class SgdaCC(_CCBase):
    AVERAGES = "pre"

    def __init__(self, spec: MethodSpec, cluster: Cluster, roster: WorkerRoster,
                 check: CheckConfig, x0: np.ndarray):
        super().__init__(cluster, roster, check, x0)
        self.gamma = spec.gamma

    def set_stage(self, stage: "SgdaStage") -> None:
        self.gamma = stage.gamma

    def step(self) -> StepStats:
        stats = StepStats()
        contributors = self._contributors()
        violators = frozenset() if self.cluster.attack.kind == "none" else \
            self.cluster.violators(self.t, contributors)
        stats.violations = len(violators)
        g_bar = self._accepted_mean(self.x, self.t, 0, contributors, violators,
                                    stats)
        self.x = self.x - self.gamma * g_bar
        self._verify_and_rotate(self.t, 0, contributors)
        self.t += 1
        return stats


class SegCC(_CCBase):
    AVERAGES = "tilde"

    def __init__(self, spec: MethodSpec, cluster: Cluster, roster: WorkerRoster,
                 check: CheckConfig, x0: np.ndarray):
        super().__init__(cluster, roster, check, x0)
        self.gamma1 = spec.gamma1
        self.gamma2 = spec.gamma2
        self.x_tilde = self.x.copy()

    def set_stage(self, stage: "SegStage") -> None:
        self.gamma1 = stage.gamma1
        self.gamma2 = stage.gamma2

    def step(self) -> StepStats:
        stats = StepStats()
        round_violators = frozenset() if self.cluster.attack.kind == "none" else \
            self.cluster.violators(self.t, self.roster.active)

        contributors = self._contributors()
        viol_xi = round_violators & set(contributors)
        stats.violations += len(viol_xi)
        g_xi = self._accepted_mean(self.x, self.t, 0, contributors, viol_xi, stats)
        self.x_tilde = self.x - self.gamma1 * g_xi
        self._verify_and_rotate(self.t, 0, contributors)

        contributors = self._contributors()
        viol_eta = round_violators & set(contributors)
        stats.violations += len(viol_eta)
        g_eta = self._accepted_mean(self.x_tilde, self.t, 1, contributors,
                                    viol_eta, stats)
        self.x = self.x - self.gamma2 * g_eta
        self._verify_and_rotate(self.t, 1, contributors)
        self.t += 1
        return stats


# ---------------------------------------------------------------------------
# restart schedules


@dataclass(frozen=True)
class SgdaStage:
    gamma: float
    iters: int


@dataclass(frozen=True)
class SegStage:
    gamma1: float
    gamma2: float
    iters: int


def restart_count(eps: float, R: float) -> int:
    if eps <= 0 or R <= 0:
        raise ConfigError("restart schedules need eps > 0 and R > 0")
    lg = math.log2(R * R / eps)
    if abs(lg - round(lg)) < 1e-12:  # R^2/eps an exact power of two
        lg = round(lg)
    return math.ceil(lg) - 1


def _sqrt_ratio(num: float, den: float) -> float:
    return math.inf if den == 0 else math.sqrt(num / den)


def restart_schedule_sgda(eps: float, R: float, sigma: float, q: float, n: int,
                          B: int, m: int, ell: float, mu: float) -> list[SgdaStage]:
    """Stagewise (stepsize, iteration count) plan halving the squared
    error each stage for the descent-ascent method with checks."""
    slack = n - 2 * B - m
    if slack < 1:
        raise ConfigError(f"need n - 2B - m >= 1, got {slack}")
    if min(ell, mu, q) <= 0:
        raise ConfigError("ell, mu and q must be positive")
    stages = []
    for t in range(1, restart_count(eps, R) + 1):
        pow_t = 2.0 ** t
        K = math.ceil(max(
            8.0 * ell / mu,
            96.0 * sigma ** 2 * pow_t / (slack * mu ** 2 * R ** 2),
            34.0 * n * sigma * B * math.sqrt(q * pow_t) / (m * mu * R) if m > 0 else 0.0,
        ))
        gamma = min(
            1.0 / (2.0 * ell),
            _sqrt_ratio(slack * R ** 2, 6.0 * sigma ** 2 * pow_t * K),
            _sqrt_ratio(m ** 2 * R ** 2, 72.0 * q * sigma ** 2 * pow_t * B ** 2 * n ** 2),
        )
        stages.append(SgdaStage(gamma=gamma, iters=K))
    return stages


def restart_schedule_seg(eps: float, R: float, sigma: float, q: float, n: int,
                         B: int, m: int, L: float, mu: float) -> list[SegStage]:
    """Analogous plan for the extragradient method with checks; the inner
    stepsize shrinks faster than the outer one."""
    G = n - B
    slack = G - B - m
    if slack < 1:
        raise ConfigError(f"need n - 2B - m >= 1, got {slack}")
    if min(L, mu, q) <= 0:
        raise ConfigError("L, mu and q must be positive")
    stages = []
    for t in range(1, restart_count(eps, R) + 1):
        pow_t = 2.0 ** t
        K = math.ceil(max(
            8.0 * L / mu,
            16.0 * n * sigma * B * math.sqrt(q * pow_t) / (m * mu * R) if m > 0 else 0.0,
            256.0 * sigma ** 2 * pow_t / (slack * mu ** 2 * R ** 2),
        ))
        gamma1 = min(
            1.0 / (2.0 * L),
            _sqrt_ratio(slack * R ** 2, 16.0 * sigma ** 2 * pow_t * K),
            _sqrt_ratio(m * R ** 2, 8.0 * q * sigma ** 2 * pow_t * B * n),
        )
        gamma2 = min(
            1.0 / (4.0 * L),
            _sqrt_ratio(m ** 2 * R ** 2, 64.0 * q * sigma ** 2 * pow_t * B ** 2 * n ** 2),
            _sqrt_ratio(slack * R ** 2, 64.0 * sigma ** 2 * K),
        )
        if gamma1 > 0 and gamma2 / gamma1 > 0.5:
            log.warning("stage %d has gamma2/gamma1 = %.3f > 1/2", t, gamma2 / gamma1)
        stages.append(SegStage(gamma1=gamma1, gamma2=gamma2, iters=K))
    return stages


def run_restarted(schedule, stepper, x0: np.ndarray, on_iterate=None) -> np.ndarray:
    """Run each stage from the previous stage's averaged output; returns
    the final stage average.  The roster persists across stages (banned
    workers stay banned)."""
    if not schedule:
        raise ConfigError("restart schedule is empty (target accuracy too loose?)")
    x_hat = np.asarray(x0, dtype=np.float64).copy()
    for stage in schedule:
        stepper.reset_to(x_hat)
        stepper.set_stage(stage)
        acc = np.zeros_like(x_hat)
        for k in range(stage.iters):
            if stepper.AVERAGES == "pre":
                acc += stepper.x
            stats = stepper.step()
            if stepper.AVERAGES == "tilde":
                acc += stepper.x_tilde
            if on_iterate is not None:
                on_iterate(stepper, stats, acc / (k + 1))
        x_hat = acc / stage.iters
    return x_hat
