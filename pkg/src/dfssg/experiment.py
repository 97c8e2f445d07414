"""Repeated-trial comparisons of DF, 2S and Unif with optional parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .datagen import SCHEMA_VERSION, GenConfig, generate_instance
from .learning import (
    TrainConfig,
    evaluate,
    evaluate_uniform,
    train_decision_focused,
    train_two_stage,
)
from .model import CHECKPOINT_VERSION
from .solver import SolverConfig

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("sweep_param", "sweep_value", "trial", "strategy", "mean_test_deu",
               "median_test_deu", "train_seconds", "solver_failures")
STRATEGIES = ("DF", "2S", "Unif")
SWEEPABLE = ("attacks_per_game", "train_games", "features_per_target")


def derive_seed(*parts):
    """Stable 32-bit seed from integer parts."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentSpec:
    gen: GenConfig = field(default_factory=GenConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    trials: int = 10
    sweep_param: Optional[str] = None
    sweep_values: tuple = ()
    output_path: Optional[str] = None
    record_timing: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.sweep_param is None:
            if self.sweep_values:
                raise ValueError("sweep values given without a sweep parameter")
        else:
            if self.sweep_param not in SWEEPABLE:
                raise ValueError(f"sweep parameter must be one of {SWEEPABLE}")
            if not self.sweep_values:
                raise ValueError("sweep parameter given without values")
            if any(int(v) != v or v < 1 for v in self.sweep_values):
                raise ValueError("sweep values must be positive integers")

    def points(self):
        """``(sweep_value, GenConfig)`` pairs; a single ``(None, gen)`` without a sweep."""
        if self.sweep_param is None:
            return [(None, self.gen)]
        return [(int(v), replace(self.gen, **{self.sweep_param: int(v)})) for v in self.sweep_values]

    def seeds(self, sweep_value, trial):
        """Instance seed (shared across sweep points) and training seed for one trial.

        Sweep values are positive, so 0 stands for "no sweep".
        """
        root = self.gen.seed
        instance = derive_seed(root, trial)
        training = derive_seed(root, 0 if sweep_value is None else sweep_value, trial)
        return instance, training

    def to_dict(self):
        return {
            "gen": self.gen.to_dict(),
            "train": self.train.to_dict(),
            "solver": asdict(self.solver),
            "trials": self.trials,
            "sweep_param": self.sweep_param,
            "sweep_values": [int(v) for v in self.sweep_values],
            "record_timing": self.record_timing,
        }


@dataclass(frozen=True)
class TrialResult:
    sweep_value: Optional[int]
    trial: int
    instance_seed: int
    train_seed: int
    mean_deu: dict
    median_deu: dict
    seconds: dict
    solver_failures: dict
    error: Optional[str] = None


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    trials: tuple

    @property
    def failures(self):
        return tuple(t for t in self.trials if t.error is not None)

    def rows(self):
        spec = self.spec
        out = []
        for t in self.trials:
            for strategy in STRATEGIES:
                ok = t.error is None
                seconds = t.seconds.get(strategy) if spec.record_timing and ok else None
                out.append({
                    "sweep_param": spec.sweep_param or "",
                    "sweep_value": "" if t.sweep_value is None else t.sweep_value,
                    "trial": t.trial,
                    "strategy": strategy,
                    "mean_test_deu": repr(t.mean_deu[strategy]) if ok else "",
                    "median_test_deu": repr(t.median_deu[strategy]) if ok else "",
                    "train_seconds": "" if seconds is None else f"{seconds:.3f}",
                    "solver_failures": t.solver_failures[strategy] if ok else "",
                })
        return out

    def to_csv(self):
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows())
        return buffer.getvalue()

    def paired_differences(self, strategy, sweep_value=None):
        """Per-trial ``mean DEU(strategy) - mean DEU(Unif)`` for one sweep point."""
        return np.array([
            t.mean_deu[strategy] - t.mean_deu["Unif"]
            for t in self.trials if t.error is None and t.sweep_value == sweep_value
        ])

    def summary(self):
        """Median over trials of DEU minus Unif, keyed by (sweep value, strategy)."""
        table = {}
        for value, _ in self.spec.points():
            for strategy in STRATEGIES:
                diffs = self.paired_differences(strategy, value)
                table[(value, strategy)] = float(np.median(diffs)) if diffs.size else float("nan")
        return table

    def summary_lines(self):
        lines = []
        for (value, strategy), median in self.summary().items():
            point = "" if value is None else f"{self.spec.sweep_param}={value} "
            lines.append(f"{point}{strategy}: median DEU - Unif = {median:+.4f}")
        return lines

    def manifest(self):
        return {
            "package_version": __version__,
            "game_schema_version": SCHEMA_VERSION,
            "checkpoint_version": CHECKPOINT_VERSION,
            "csv_columns": list(CSV_COLUMNS),
            "spec": self.spec.to_dict(),
            "trials": [
                {"sweep_value": t.sweep_value, "trial": t.trial,
                 "instance_seed": t.instance_seed, "train_seed": t.train_seed,
                 "error": t.error}
                for t in self.trials
            ],
        }


def _timed(fn, record):
    start = time.perf_counter()
    value = fn()
    return value, (time.perf_counter() - start if record else None)


def run_trial(spec, sweep_value, gen, trial):
    """Generate one instance, train both learners and evaluate all three strategies."""
    instance_seed, train_seed = spec.seeds(sweep_value, trial)
    try:
        dataset, _ = generate_instance(replace(gen, seed=instance_seed), spec.solver)
        train_cfg = replace(spec.train, seed=train_seed)
        df, df_time = _timed(
            lambda: train_decision_focused(dataset, train_cfg, spec.solver), spec.record_timing)
        two, two_time = _timed(lambda: train_two_stage(dataset, train_cfg), spec.record_timing)
        evals = {
            "DF": evaluate(df, dataset.test, solver_config=spec.solver),
            "2S": evaluate(two, dataset.test, solver_config=spec.solver),
            "Unif": evaluate_uniform(dataset.test, dataset.w_coverage, spec.solver),
        }
    except Exception as exc:  # recorded per row; a sweep never aborts
        logger.error("trial %s (sweep value %s) failed: %s", trial, sweep_value, exc)
        return TrialResult(sweep_value, trial, instance_seed, train_seed, {}, {}, {}, {},
                           error=f"{type(exc).__name__}: {exc}")
    return TrialResult(
        sweep_value=sweep_value,
        trial=trial,
        instance_seed=instance_seed,
        train_seed=train_seed,
        mean_deu={k: e.mean for k, e in evals.items()},
        median_deu={k: e.median for k, e in evals.items()},
        seconds={"DF": df_time, "2S": two_time, "Unif": 0.0 if spec.record_timing else None},
        solver_failures={k: e.solver_failures for k, e in evals.items()},
    )


def run_experiment(spec, progress=None):
    """Run every (sweep value, trial); write CSV and manifest when ``spec.output_path`` is set.

    ``progress`` is called with each finished TrialResult, in order.
    """
    jobs = [(spec, value, gen, trial) for value, gen in spec.points() for trial in range(spec.trials)]
    results = []
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for result in pool.map(run_trial, *zip(*jobs)):
                results.append(result)
                if progress:
                    progress(result)
    else:
        for job in jobs:
            result = run_trial(*job)
            results.append(result)
            if progress:
                progress(result)
    outcome = ExperimentResult(spec, tuple(results))
    if spec.output_path:
        path = Path(spec.output_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(outcome.to_csv())
        manifest_path(path).write_text(json.dumps(outcome.manifest(), indent=1) + "\n")
    return outcome


def manifest_path(csv_path):
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + ".manifest.json")
