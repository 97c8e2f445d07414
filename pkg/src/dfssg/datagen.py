"""Synthetic SSG instances and the game-file format.

Every random quantity is drawn from its own stream keyed by
``(seed, stream, index)``, so changing the number of training games or
attacks per game leaves the test games and value networks untouched.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .game import Dataset, SecurityGame, suqr_attack_distribution
from .model import ValueModel, forward, forward_raw, init_model
from .solver import SolverConfig, uniform_coverage

SCHEMA_VERSION = 1
SPLITS = ("train", "validation", "test")

# stream ids for np.random.default_rng([seed, stream, index])
_ATTACKER_NET, _DEFENDER_NET, _TEST_FEATURES, _TRAIN_FEATURES, _ATTACKS, _SPLIT = range(6)


@dataclass(frozen=True)
class GenConfig:
    target_count: int = 8
    features_per_target: int = 100
    train_games: int = 50
    test_games: int = 50
    attacks_per_game: int = 5
    budget: Optional[float] = None
    w_coverage: float = -4.0
    value_net_hidden: int = 200
    validation_fraction: float = 0.2
    feature_range: float = 10.0
    seed: int = 0

    def __post_init__(self):
        for name in ("target_count", "features_per_target", "train_games", "test_games",
                     "attacks_per_game", "value_net_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.w_coverage < 0:
            raise ValueError("w_coverage must be negative")
        if not 0 < self.resolved_budget < self.target_count:
            raise ValueError("budget must lie in (0, target_count)")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")

    @property
    def resolved_budget(self) -> float:
        """Explicit budget, else 3 resources per 8 targets (3 for 8, 9 for 24)."""
        if self.budget is not None:
            return float(self.budget)
        return 3.0 * self.target_count / 8.0

    def to_dict(self):
        data = asdict(self)
        data["budget"] = self.resolved_budget
        return data


@dataclass(frozen=True, eq=False)
class GroundTruth:
    attacker: ValueModel
    defender: ValueModel


class GameFileError(ValueError):
    pass


def _rng(seed, stream, index=0):
    return np.random.default_rng([seed, stream, index])


def sample_attacks(q, n, rng):
    """Tally ``n`` independent attacks drawn from distribution ``q``."""
    if n < 1:
        raise ValueError("number of attacks must be positive")
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("q must be a probability vector")
    return rng.multinomial(int(n), q / q.sum())


def rescale_defender_values(raw, low=-10.0, high=0.0):
    """Affine map of ``raw`` onto ``[low, high]`` (min -> low, max -> high)."""
    raw = np.asarray(raw, dtype=float)
    span = raw.max() - raw.min()
    if span <= 0:
        return np.full(raw.shape, low)
    values = np.clip(low + (high - low) * (raw - raw.min()) / span, low, high)
    values[np.argmin(raw)] = low
    values[np.argmax(raw)] = high
    return values


def _validation_count(n_games, fraction):
    if n_games < 2 or fraction == 0:
        return 0
    return min(math.ceil(fraction * n_games), n_games - 1)


def generate_instance(config, solver_config=None):
    """Draw one SSG-LA instance.

    Returns ``(dataset, ground_truth)``. Training games carry the Unif
    historical coverage and attacks sampled from the true SUQR attacker;
    test games carry the true attractiveness. A deterministic
    ``validation_fraction`` of the training games is held out.
    """
    cfg = config
    solver_config = solver_config or SolverConfig()
    n, f = cfg.target_count, cfg.features_per_target
    budget = cfg.resolved_budget
    w = cfg.w_coverage
    attacker = init_model(f, cfg.value_net_hidden, seed=[cfg.seed, _ATTACKER_NET, 0], w_coverage=w)
    defender = init_model(f, cfg.value_net_hidden, seed=[cfg.seed, _DEFENDER_NET, 0], w_coverage=w)
    lim = cfg.feature_range

    def make_game(stream, index):
        y = _rng(cfg.seed, stream, index).uniform(-lim, lim, (n, f))
        u = rescale_defender_values(forward_raw(defender, y))
        return y, u, forward(attacker, y)

    test = []
    for i in range(cfg.test_games):
        y, u, phi = make_game(_TEST_FEATURES, i)
        test.append(SecurityGame(y, u, budget, true_phi=phi))

    train = []
    for i in range(cfg.train_games):
        y, u, phi = make_game(_TRAIN_FEATURES, i)
        p = uniform_coverage(n, budget, u, w, solver_config)
        q = suqr_attack_distribution(p, phi, w)
        counts = sample_attacks(q, cfg.attacks_per_game, _rng(cfg.seed, _ATTACKS, i))
        train.append(SecurityGame(y, u, budget, historical_coverage=p,
                                  attack_counts=counts, true_phi=phi))

    n_val = _validation_count(len(train), cfg.validation_fraction)
    order = _rng(cfg.seed, _SPLIT).permutation(len(train))
    held_out = set(order[:n_val].tolist())
    validation = [g for i, g in enumerate(train) if i in held_out]
    train = [g for i, g in enumerate(train) if i not in held_out]
    dataset = Dataset(train, validation, test, w_coverage=w)
    return dataset, GroundTruth(attacker, defender)


def _game_to_dict(game, split):
    data = {
        "split": split,
        "targets": game.target_count,
        "budget": float(game.budget),
        "features": game.features.tolist(),
        "defender_values": game.defender_values.tolist(),
    }
    if game.historical_coverage is not None:
        data["historical_coverage"] = game.historical_coverage.tolist()
    if game.attack_counts is not None:
        data["attack_counts"] = [int(c) for c in game.attack_counts]
    if game.true_phi is not None:
        data["true_phi"] = game.true_phi.tolist()
    return data


def dataset_to_dict(dataset):
    games = []
    for split in SPLITS:
        games.extend(_game_to_dict(g, split) for g in getattr(dataset, split))
    return {
        "schema_version": SCHEMA_VERSION,
        "w_coverage": float(dataset.w_coverage),
        "games": games,
    }


def dumps_games(dataset):
    return json.dumps(dataset_to_dict(dataset), indent=1) + "\n"


def save_games(dataset, path):
    Path(path).write_text(dumps_games(dataset))


def _field(raw, index, name, required=True):
    if name not in raw:
        if required:
            raise GameFileError(f"game {index}: missing field '{name}'")
        return None
    return raw[name]


def dataset_from_dict(data):
    if not isinstance(data, dict):
        raise GameFileError("top level must be an object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise GameFileError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    if "w_coverage" not in data:
        raise GameFileError("missing field 'w_coverage'")
    games = data.get("games")
    if not isinstance(games, list):
        raise GameFileError("field 'games' must be a list")
    splits = {s: [] for s in SPLITS}
    for i, raw in enumerate(games):
        if not isinstance(raw, dict):
            raise GameFileError(f"game {i}: entry must be an object")
        split = raw.get("split", "test")
        if split not in SPLITS:
            raise GameFileError(f"game {i}: field 'split' must be one of {SPLITS}, got {split!r}")
        needs_attacks = split != "test"
        try:
            features = np.array(_field(raw, i, "features"), dtype=float)
            targets = _field(raw, i, "targets")
            if features.ndim != 2 or features.shape[0] != targets:
                raise GameFileError(
                    f"game {i}: field 'features' must have {targets} rows")
            game = SecurityGame(
                features=features,
                defender_values=_field(raw, i, "defender_values"),
                budget=_field(raw, i, "budget"),
                historical_coverage=_field(raw, i, "historical_coverage", needs_attacks),
                attack_counts=_field(raw, i, "attack_counts", needs_attacks),
                true_phi=_field(raw, i, "true_phi", False),
            )
        except GameFileError:
            raise
        except (TypeError, ValueError) as exc:
            raise GameFileError(f"game {i} ({split}): {exc}") from exc
        splits[split].append(game)
    try:
        return Dataset(splits["train"], splits["validation"], splits["test"],
                       w_coverage=float(data["w_coverage"]))
    except ValueError as exc:
        raise GameFileError(str(exc)) from exc


def loads_games(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFileError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return dataset_from_dict(data)


def load_games(path):
    return loads_games(Path(path).read_text())
