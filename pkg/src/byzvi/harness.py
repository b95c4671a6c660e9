"""Experiment orchestration: validated JSON configs, seeded runs, CSV metrics.

A run is fully determined by (config, master_seed): the game, every
worker's samples, attack draws, bucketing permutations and check pair
selections all derive from the hierarchical key schedule, so re-running
a config reproduces the output byte for byte.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import game as game_mod
from . import methods
from .aggregators import AggregatorSpec
from .attacks import AttackSpec
from .checkcomp import CheckConfig, WorkerRoster
from .core import distance_sq, estimate_sigma
from .errors import ConfigError
from .methods import MethodSpec
from .world import Cluster

log = logging.getLogger(__name__)

CSV_HEADER = ("iteration", "oracle_calls", "dist_sq", "dist_sq_avg", "accepted",
              "resamples", "violations", "banned_total", "banned_byz", "banned_good")

_RA_KINDS = ("sgda-ra", "seg-ra", "m-sgda-ra", "rdeg")
_CC_KINDS = ("sgda-cc", "seg-cc", "r-sgda-cc", "r-seg-cc")
_RESTARTED = ("r-sgda-cc", "r-seg-cc")


@dataclass
class ProblemConfig:
    s: int = 0
    d: int = 0
    mu: float = 0.0
    ell: float = 0.0
    game_seed: int = 0
    game_file: str | None = None


@dataclass
class RosterConfig:
    n: int
    b: int  # Byzantine count
    m: int = 0


@dataclass
class RunConfig:
    problem: ProblemConfig
    roster: RosterConfig
    method: MethodSpec
    aggregator: AggregatorSpec = field(default_factory=AggregatorSpec)
    attack: AttackSpec = field(default_factory=AttackSpec)
    check: CheckConfig = field(default_factory=CheckConfig)
    batch_size: int | str = 1            # positive int, or "full" for exhaustive
    iterations: int = 0
    master_seed: int = 0
    metrics_every: int = 1
    sigma_override: float | None = None
    sigma_samples: int = 1000
    data_mode: str = "homogeneous"

    @property
    def exhaustive(self) -> bool:
        return self.batch_size == "full"


@dataclass
class MetricsRecord:
    iteration: int
    oracle_calls: int
    dist_sq: float
    dist_sq_avg: float | None
    accepted: bool
    resamples: int
    violations: int
    banned_total: int
    banned_byz: int
    banned_good: int


@dataclass
class RunResult:
    x: np.ndarray
    game: game_mod.QuadraticGame
    sigma: float
    roster: WorkerRoster | None
    oracle_calls: int


def _build(cls, section: dict, name: str):
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"bad {name} section: {exc}") from exc


def validate_config(cfg: RunConfig) -> RunConfig:
    r, meth = cfg.roster, cfg.method
    if r.n < 1 or r.b < 0 or r.m < 0:
        raise ConfigError("roster needs n >= 1, b >= 0, m >= 0")
    if 2 * r.b >= r.n:
        raise ConfigError(
            f"b={r.b} Byzantine workers of n={r.n} form a majority; the "
            "corrupted fraction must stay below 1/2")
    if cfg.iterations < 0:
        raise ConfigError("iterations must be >= 0")
    if cfg.metrics_every < 1:
        raise ConfigError("metrics_every must be >= 1")
    if not cfg.exhaustive and (not isinstance(cfg.batch_size, int) or cfg.batch_size < 1):
        raise ConfigError(f"batch_size must be a positive integer or \"full\", "
                          f"got {cfg.batch_size!r}")
    if cfg.data_mode not in ("homogeneous", "heterogeneous"):
        raise ConfigError(f"unknown data_mode {cfg.data_mode!r}")
    if meth.kind in _CC_KINDS and cfg.data_mode != "homogeneous":
        raise ConfigError("checks of computations require homogeneous data")
    if meth.kind in ("sgda-ra", "m-sgda-ra", "sgda-cc") and meth.gamma <= 0:
        raise ConfigError(f"{meth.kind} needs gamma > 0")
    if meth.kind in ("seg-ra", "seg-cc", "rdeg") and (meth.gamma1 <= 0 or meth.gamma2 <= 0):
        raise ConfigError(f"{meth.kind} needs gamma1 > 0 and gamma2 > 0")
    if meth.kind in _RESTARTED:
        if meth.eps_target <= 0:
            raise ConfigError(f"{meth.kind} needs eps_target > 0")
        if r.m < 1:
            raise ConfigError("restarted methods need at least one checker (m >= 1)")
    if meth.kind == "rdeg" and cfg.aggregator.kind != "trim":
        raise ConfigError("rdeg requires the trim aggregator")
    if cfg.problem.game_file is None and cfg.problem.s < 1:
        raise ConfigError("problem needs either game_file or s/d/mu/ell")
    return cfg


def config_from_dict(raw: dict) -> RunConfig:
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(
        problem=_build(ProblemConfig, raw.get("problem", {}), "problem"),
        roster=_build(RosterConfig, raw.get("roster", {}), "roster"),
        method=_build(MethodSpec, raw.get("method", {}), "method"),
        aggregator=_build(AggregatorSpec, raw.get("aggregator", {}), "aggregator"),
        attack=_build(AttackSpec, raw.get("attack", {}), "attack"),
        check=_build(CheckConfig, raw.get("check", {}), "check"),
        batch_size=raw.get("batch_size", 1),
        iterations=raw.get("iterations", 0),
        master_seed=raw.get("master_seed", 0),
        metrics_every=raw.get("metrics_every", 1),
        sigma_override=raw.get("sigma_override"),
        sigma_samples=raw.get("sigma_samples", 1000),
        data_mode=raw.get("data_mode", "homogeneous"),
    )
    return validate_config(cfg)


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def _load_game(cfg: RunConfig) -> game_mod.QuadraticGame:
    p = cfg.problem
    if p.game_file is not None:
        return game_mod.load_game(p.game_file)
    return game_mod.generate(p.s, p.d, p.mu, p.ell, p.game_seed)


def resolve_sigma(cfg: RunConfig, game: game_mod.QuadraticGame,
                  x0: np.ndarray) -> float:
    """Per-submission noise level: estimated at x0 once per run unless the
    config supplies it; scaled down by sqrt(batch)."""
    if cfg.sigma_override is not None:
        return float(cfg.sigma_override)
    if cfg.exhaustive:
        return 0.0
    sigma1 = estimate_sigma(game, x0, cfg.sigma_samples, cfg.master_seed)
    return sigma1 / np.sqrt(cfg.batch_size)


def build_cluster(cfg: RunConfig, game: game_mod.QuadraticGame) -> Cluster:
    byz_ids = range(cfg.roster.n - cfg.roster.b, cfg.roster.n)
    return Cluster(game, cfg.roster.n, byz_ids, cfg.attack,
                   batch=1 if cfg.exhaustive else cfg.batch_size,
                   master_seed=cfg.master_seed, mode=cfg.data_mode,
                   exhaustive=cfg.exhaustive)


def build_stepper(cfg: RunConfig, cluster: Cluster, check: CheckConfig,
                  x0: np.ndarray, mu: float):
    kind = cfg.method.kind
    if kind == "sgda-ra":
        return methods.SgdaRA(cfg.method, cfg.aggregator, cluster, x0)
    if kind == "seg-ra":
        return methods.SegRA(cfg.method, cfg.aggregator, cluster, x0)
    if kind == "m-sgda-ra":
        return methods.MSgdaRA(cfg.method, cfg.aggregator, cluster, x0, mu)
    if kind == "rdeg":
        return methods.Rdeg(cfg.method, cfg.aggregator, cluster, x0)
    roster = WorkerRoster.create(cfg.roster.n, cluster.byz, cfg.roster.m)
    if kind in ("sgda-cc", "r-sgda-cc"):
        return methods.SgdaCC(cfg.method, cluster, roster, check, x0)
    return methods.SegCC(cfg.method, cluster, roster, check, x0)


def build_schedule(cfg: RunConfig, sigma: float, R: float):
    meth, r = cfg.method, cfg.roster
    q = cfg.check.q_value(r.n, r.b, r.m)
    if meth.kind == "r-sgda-cc":
        return methods.restart_schedule_sgda(
            meth.eps_target, R, sigma, q, r.n, r.b, r.m,
            cfg.problem.ell, cfg.problem.mu)
    return methods.restart_schedule_seg(
        meth.eps_target, R, sigma, q, r.n, r.b, r.m,
        cfg.problem.ell, cfg.problem.mu)


class _MetricsWriter:
    """Streams records to disk as they are produced so that a failed run
    still leaves the rows emitted so far."""

    def __init__(self, path: str | Path | None):
        self.records: list[MetricsRecord] = []
        self._fh = None
        self._csv = None
        if path is not None:
            self._fh = open(path, "w", newline="")
            self._csv = csv.writer(self._fh)
            self._csv.writerow(CSV_HEADER)
            self._fh.flush()

    def emit(self, rec: MetricsRecord) -> None:
        self.records.append(rec)
        if self._csv is not None:
            self._csv.writerow(_format_row(rec))
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None


def run_experiment(cfg: RunConfig, out_path: str | Path | None = None,
                   ) -> tuple[list[MetricsRecord], RunResult]:
    """Execute one seeded run, emitting a record every metrics_every
    iterations plus the final one."""
    validate_config(cfg)
    game = _load_game(cfg)
    x_star = game.x_star if game.x_star is not None else game_mod.solve_exact(game)
    x0 = np.zeros(game.d)
    sigma = resolve_sigma(cfg, game, x0)
    check = CheckConfig(radius=cfg.check.radius, sigma=sigma,
                        max_resamples=cfg.check.max_resamples)
    cluster = build_cluster(cfg, game)
    stepper = build_stepper(cfg, cluster, check, x0, game.mu)

    echo = {k: v for k, v in asdict(cfg).items()}
    echo["x0"] = "zeros"  # starting point convention, not configurable
    echo["sigma_resolved"] = sigma
    log.info("run config: %s", json.dumps(echo, default=str))

    writer = _MetricsWriter(out_path)

    def roster_counts():
        roster = getattr(stepper, "roster", None)
        if roster is None:
            return 0, 0, 0
        return len(roster.banned), roster.banned_byz, roster.banned_good

    def emit(iteration: int, stats: methods.StepStats, avg_point=None):
        total, byz, good = roster_counts()
        avg = None if avg_point is None else distance_sq(avg_point, x_star)
        writer.emit(MetricsRecord(
            iteration=iteration, oracle_calls=cluster.oracle_calls,
            dist_sq=distance_sq(stepper.x, x_star), dist_sq_avg=avg,
            accepted=stats.accepted, resamples=stats.resamples,
            violations=stats.violations, banned_total=total, banned_byz=byz,
            banned_good=good))

    try:
        emit(0, methods.StepStats())
        if cfg.method.kind in _RESTARTED:
            x_final = _run_restarted(cfg, stepper, sigma, x0, x_star, emit)
        else:
            x_final = _run_plain(cfg, stepper, emit)
    finally:
        writer.close()
    return writer.records, RunResult(x=x_final, game=game, sigma=sigma,
                                     roster=getattr(stepper, "roster", None),
                                     oracle_calls=cluster.oracle_calls)


def _run_plain(cfg: RunConfig, stepper, emit) -> np.ndarray:
    T = cfg.iterations
    last_stats = methods.StepStats()
    for k in range(1, T + 1):
        last_stats = stepper.step()
        if k < T and k % cfg.metrics_every == 0:
            avg = _averaged_point(stepper)
            emit(k, last_stats, avg)
    if T > 0:
        if isinstance(stepper, methods.MSgdaRA):
            stepper.averaging.push(stepper.x)  # fold the final iterate in
        emit(T, last_stats, _averaged_point(stepper))
    return stepper.x


def _averaged_point(stepper):
    if isinstance(stepper, methods.MSgdaRA):
        return stepper.averaging.x_bar
    return None


def _run_restarted(cfg: RunConfig, stepper, sigma: float, x0, x_star, emit):
    R = cfg.method.r_bound
    if R <= 0:
        R = float(np.sqrt(distance_sq(x0, x_star)))
    schedule = build_schedule(cfg, sigma, R)
    counter = {"k": 0}

    def on_iterate(stp, stats, stage_avg):
        counter["k"] += 1
        k = counter["k"]
        if k % cfg.metrics_every == 0:
            emit(k, stats, stage_avg)
    x_hat = methods.run_restarted(schedule, stepper, x0, on_iterate)
    emit(counter["k"], methods.StepStats(), x_hat)
    return x_hat


# ---------------------------------------------------------------------------
# metrics persistence


def _format_row(rec: MetricsRecord) -> list[str]:
    return [
        str(rec.iteration), str(rec.oracle_calls), repr(rec.dist_sq),
        "" if rec.dist_sq_avg is None else repr(rec.dist_sq_avg),
        str(rec.accepted), str(rec.resamples), str(rec.violations),
        str(rec.banned_total), str(rec.banned_byz), str(rec.banned_good),
    ]


def write_metrics(path: str | Path, records: list[MetricsRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for rec in records:
            w.writerow(_format_row(rec))


def read_metrics(path: str | Path) -> list[MetricsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ConfigError(f"{path}: missing or wrong metrics header")
    out = []
    for row in rows[1:]:
        out.append(MetricsRecord(
            iteration=int(row[0]), oracle_calls=int(row[1]),
            dist_sq=float(row[2]),
            dist_sq_avg=None if row[3] == "" else float(row[3]),
            accepted=row[4] == "True", resamples=int(row[5]),
            violations=int(row[6]), banned_total=int(row[7]),
            banned_byz=int(row[8]), banned_good=int(row[9])))
    return out
