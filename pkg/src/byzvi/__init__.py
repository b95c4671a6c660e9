"""byzvi: Byzantine-robust distributed variational-inequality simulator."""

from .aggregators import AggregatorSpec, aggregate
from .attacks import AttackSpec
from .checkcomp import CheckConfig, WorkerRoster
from .core import OracleView, ProblemInfo, distance_sq, estimate_sigma, evaluate_full, sample_stochastic
from .errors import AggregationError, ConfigError, NumericalError, ProtocolError
from .game import QuadraticGame, generate, load_game, save_game, solve_exact, spectral_check
from .harness import MetricsRecord, RunConfig, load_config, read_metrics, run_experiment, write_metrics
from .methods import MethodSpec
from .world import Cluster

__version__ = "0.1.0"

__all__ = [
    "AggregatorSpec", "aggregate", "AttackSpec", "CheckConfig", "WorkerRoster",
    "OracleView", "ProblemInfo", "distance_sq", "estimate_sigma",
    "evaluate_full", "sample_stochastic", "AggregationError", "ConfigError",
    "NumericalError", "ProtocolError", "QuadraticGame", "generate",
    "load_game", "save_game", "solve_exact", "spectral_check",
    "MetricsRecord", "RunConfig", "load_config", "read_metrics",
    "run_experiment", "write_metrics", "MethodSpec", "Cluster", "__version__",
]
