"""Command-line entry point: ``dfssg {gen,train,eval,run,verify-theory}``.

Every flag can also be set from a JSON object passed with ``--config``; keys
are the flag names with dashes replaced by underscores, and values from the
file take precedence over the command line.

Exit codes: 0 success, 1 usage or input error, 2 verification failure,
3 some trials failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .datagen import GameFileError, GenConfig, generate_instance, load_games, save_games
from .experiment import SWEEPABLE, ExperimentSpec, run_experiment
from .learning import TrainConfig, evaluate, evaluate_uniform, train_decision_focused, train_two_stage
from .model import load_model, save_model
from .solver import SolverConfig
from .theory import run_theory_checks

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_PARTIAL = 0, 1, 2, 3

log = logging.getLogger("dfssg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _gen_flags(p):
    g = p.add_argument_group("instance generation")
    g.add_argument("--target-count", type=int, default=8)
    g.add_argument("--features-per-target", type=int, default=100)
    g.add_argument("--train-games", type=int, default=50)
    g.add_argument("--test-games", type=int, default=50)
    g.add_argument("--attacks-per-game", type=int, default=5)
    g.add_argument("--budget", type=float, default=None, help="default: 3 per 8 targets")
    g.add_argument("--w-coverage", type=float, default=-4.0)
    g.add_argument("--value-net-hidden", type=int, default=200)
    g.add_argument("--validation-fraction", type=float, default=0.2)
    g.add_argument("--feature-range", type=float, default=10.0)


def _train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int, default=100)
    g.add_argument("--learning-rate", type=float, default=1e-3)
    g.add_argument("--patience", type=int, default=10, dest="early_stopping_patience")
    g.add_argument("--dropout-rate", type=float, default=0.5, help="two-stage only")
    g.add_argument("--smoothing-alpha", type=float, default=None, help="default: 1/targets")
    g.add_argument("--hidden-dim", type=int, default=200)
    g.add_argument("--no-standardize", action="store_false", dest="standardize_inputs")


def _solver_flags(p):
    g = p.add_argument_group("defender solver")
    d = SolverConfig()
    g.add_argument("--restarts", type=int, default=d.restarts)
    g.add_argument("--max-iterations", type=int, default=d.max_iterations)
    g.add_argument("--stationarity-tolerance", type=float, default=d.stationarity_tolerance)
    g.add_argument("--initial-step", type=float, default=d.initial_step)
    g.add_argument("--backtracking-factor", type=float, default=d.backtracking_factor)
    g.add_argument("--min-step", type=float, default=d.min_step)
    g.add_argument("--armijo", type=float, default=d.armijo)
    g.add_argument("--no-polish", action="store_false", dest="polish")
    g.add_argument("--solver-seed", type=int, default=d.seed)


def build_parser():
    parser = _Parser(prog="dfssg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic dataset file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    _gen_flags(p)
    _solver_flags(p)

    p = sub.add_parser("train", help="train a value model on a dataset file")
    p.add_argument("--games", required=True)
    p.add_argument("--method", choices=("two-stage", "decision-focused"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--history", help="write per-epoch records to this JSON file")
    p.add_argument("--config")
    _train_flags(p)
    _solver_flags(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint (or Unif) on a dataset split")
    p.add_argument("--games", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--uniform", action="store_true")
    p.add_argument("--split", choices=("train", "validation", "test"), default="test")
    p.add_argument("--out", help="write per-game DEU to this JSON file")
    p.add_argument("--config")
    _solver_flags(p)

    p = sub.add_parser("run", help="repeated DF / 2S / Unif comparison")
    p.add_argument("--out", required=True, help="results CSV; the manifest goes alongside")
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--sweep-param", choices=SWEEPABLE)
    p.add_argument("--sweep-values", type=_int_list, default=())
    p.add_argument("--record-timing", action="store_true",
                   help="fill train_seconds (the CSV is then no longer reproducible)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config")
    _gen_flags(p)
    _train_flags(p)
    _solver_flags(p)

    p = sub.add_parser("verify-theory", help="check the two-target results")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theorem1-cases", type=int, default=100)
    p.add_argument("--theorem2-cases", type=int, default=20)
    p.add_argument("--grid-resolution", type=float, default=1e-4)
    p.add_argument("--config")
    return parser


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def apply_config_file(args):
    """Override parsed flags with the JSON object in ``args.config``."""
    if not getattr(args, "config", None):
        return args
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {args.config}: {exc}")
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    for key, value in data.items():
        key = key.replace("-", "_")
        if key in ("command", "config") or not hasattr(args, key):
            raise UsageError(f"config file: unknown option {key!r} for '{args.command}'")
        if key == "sweep_values":
            value = tuple(value)
        setattr(args, key, value)
    return args


def _pick(cls, args, **extra):
    names = {f.name for f in fields(cls)}
    values = {k: v for k, v in vars(args).items() if k in names}
    values.update(extra)
    return cls(**values)


def gen_config(args):
    return _pick(GenConfig, args, seed=args.seed)


def train_config(args):
    return _pick(TrainConfig, args, seed=args.seed)


def solver_config(args):
    return _pick(SolverConfig, args, seed=args.solver_seed)


def cmd_gen(args):
    dataset, _ = generate_instance(gen_config(args), solver_config(args))
    save_games(dataset, args.out)
    print(f"wrote {len(dataset.train)} train, {len(dataset.validation)} validation, "
          f"{len(dataset.test)} test games to {args.out}")
    return EXIT_OK


def cmd_train(args):
    dataset = load_games(args.games)
    config = train_config(args)
    history = []
    if args.method == "two-stage":
        model = train_two_stage(dataset, config, history=history)
    else:
        model = train_decision_focused(dataset, config, solver_config(args), history=history)
    save_model(model, args.out)
    if args.history:
        Path(args.history).write_text(json.dumps(history, indent=1) + "\n")
    print(f"{args.method}: {len(history) - 1} epochs, checkpoint written to {args.out}")
    return EXIT_OK


def cmd_eval(args):
    dataset = load_games(args.games)
    games = getattr(dataset, args.split)
    if not games:
        raise UsageError(f"split '{args.split}' is empty")
    solver = solver_config(args)
    if args.uniform:
        result = evaluate_uniform(games, dataset.w_coverage, solver)
    else:
        result = evaluate(load_model(args.model), games, dataset.w_coverage, solver)
    print(f"mean DEU {result.mean!r}")
    print(f"median DEU {result.median!r}")
    print(f"solver failures {result.solver_failures}")
    if args.out:
        Path(args.out).write_text(json.dumps({
            "split": args.split,
            "mean_deu": result.mean,
            "median_deu": result.median,
            "solver_failures": result.solver_failures,
            "deus": result.deus.tolist(),
        }, indent=1) + "\n")
    return EXIT_OK


def cmd_run(args):
    spec = ExperimentSpec(
        gen=gen_config(args),
        train=train_config(args),
        solver=solver_config(args),
        trials=args.trials,
        sweep_param=args.sweep_param,
        sweep_values=tuple(args.sweep_values),
        output_path=args.out,
        record_timing=args.record_timing,
        workers=args.workers,
    )

    def progress(t):
        point = "" if t.sweep_value is None else f"{spec.sweep_param}={t.sweep_value} "
        if t.error:
            print(f"{point}trial {t.trial}: FAILED ({t.error})", flush=True)
        else:
            deus = " ".join(f"{k} {v:+.4f}" for k, v in t.mean_deu.items())
            print(f"{point}trial {t.trial}: mean DEU {deus}", flush=True)

    result = run_experiment(spec, progress)
    for line in result.summary_lines():
        print(line)
    if result.failures:
        print(f"{len(result.failures)} of {len(result.trials)} trials failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def verify_theory(args, ratio=None):
    kwargs = {} if ratio is None else {"ratio": ratio}
    report = run_theory_checks(args.theorem1_cases, args.theorem2_cases, args.grid_resolution,
                               args.seed, **kwargs)
    for line in report.lines():
        print(line)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures)
        print(f"verification failed: {names}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "train": cmd_train,
    "eval": cmd_eval,
    "run": cmd_run,
    "verify-theory": verify_theory,
}


def main(argv=None):
    try:
        args = apply_config_file(build_parser().parse_args(argv))
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (GameFileError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
