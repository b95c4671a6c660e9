"""Command-line interface.

Subcommands: ``run`` executes a config and writes the metrics CSV,
``schedule`` prints the restart stage table as TSV, ``spectrum`` prints
the structural report of the configured game.  Exit codes: 0 success,
1 config error, 2 runtime/numerical/protocol failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import game as game_mod
from . import harness, methods
from .core import distance_sq
from .errors import AggregationError, ConfigError, NumericalError, ProtocolError

import numpy as np


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config errors, exit 1
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="byzvi", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="metrics CSV path")

    sched = sub.add_parser("schedule", help="print the restart stage table")
    sched.add_argument("--config", required=True)

    spec = sub.add_parser("spectrum", help="print the game structure report")
    spec.add_argument("--config", required=True)
    return p


def _cmd_run(args) -> int:
    cfg = harness.load_config(args.config)
    records, result = harness.run_experiment(cfg, out_path=args.out)
    print(f"wrote {len(records)} records to {args.out}; "
          f"final dist_sq={records[-1].dist_sq:.6e}")
    return 0


def _cmd_schedule(args) -> int:
    cfg = harness.load_config(args.config)
    if cfg.method.kind not in ("r-sgda-cc", "r-seg-cc"):
        raise ConfigError(f"method {cfg.method.kind!r} has no restart schedule")
    game = game_mod.generate(cfg.problem.s, cfg.problem.d, cfg.problem.mu,
                             cfg.problem.ell, cfg.problem.game_seed) \
        if cfg.problem.game_file is None else game_mod.load_game(cfg.problem.game_file)
    x0 = np.zeros(game.d)
    sigma = harness.resolve_sigma(cfg, game, x0)
    R = cfg.method.r_bound
    if R <= 0:
        R = float(np.sqrt(distance_sq(x0, game.x_star)))
    schedule = harness.build_schedule(cfg, sigma, R)
    if isinstance(schedule[0], methods.SegStage):
        print("stage\tgamma1\tgamma2\tK")
        for t, st in enumerate(schedule, start=1):
            print(f"{t}\t{st.gamma1!r}\t{st.gamma2!r}\t{st.iters}")
    else:
        print("stage\tgamma\tK")
        for t, st in enumerate(schedule, start=1):
            print(f"{t}\t{st.gamma!r}\t{st.iters}")
    return 0


def _cmd_spectrum(args) -> int:
    cfg = harness.load_config(args.config)
    game = game_mod.generate(cfg.problem.s, cfg.problem.d, cfg.problem.mu,
                             cfg.problem.ell, cfg.problem.game_seed) \
        if cfg.problem.game_file is None else game_mod.load_game(cfg.problem.game_file)
    rep = game_mod.spectral_check(game)
    print(f"min_eig\t{rep.min_eig!r}")
    print(f"max_eig\t{rep.max_eig!r}")
    print(f"max_asymmetry\t{rep.max_asymmetry!r}")
    print(f"lipschitz_est\t{rep.lipschitz_est!r}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "schedule":
            return _cmd_schedule(args)
        return _cmd_spectrum(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ProtocolError, NumericalError, AggregationError, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
