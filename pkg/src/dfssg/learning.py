"""Two-stage and decision-focused training of the target-value network.

Both trainers make one Adam step per training game, visiting games in a
seeded shuffled order, and keep the checkpoint with the best validation
score (cross-entropy for two-stage, counterfactual DEU for
decision-focused).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.preprocessing import StandardScaler

from .diffopt import DegenerateActiveSetError, SingularKKTError, chain_gradient
from .game import (
    center,
    cross_entropy_loss,
    defender_expected_utility,
    empirical_attack_distribution,
    suqr_attack_distribution,
)
from .model import apply_update, backward, forward, init_model, sample_dropout_mask
from .solver import SolverConfig, solve_defender

logger = logging.getLogger(__name__)

# seed streams, disjoint from the generator's three-element keys
_INIT_STREAM, _TWO_STAGE_STREAM, _DF_STREAM = 101, 102, 103


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    early_stopping_patience: int = 10
    dropout_rate: float = 0.5
    smoothing_alpha: Optional[float] = None  # None: 1 / n_targets
    hidden_dim: int = 200
    standardize_inputs: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.early_stopping_patience < 1:
            raise ValueError("early_stopping_patience must be positive")
        if self.epochs and self.early_stopping_patience > self.epochs:
            raise ValueError("early_stopping_patience cannot exceed epochs")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.smoothing_alpha is not None and self.smoothing_alpha < 0:
            raise ValueError("smoothing_alpha must be nonnegative")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Evaluation:
    deus: np.ndarray
    coverages: tuple
    solver_failures: int

    @property
    def mean(self):
        return float(np.mean(self.deus))

    @property
    def median(self):
        return float(np.median(self.deus))


def recover_attractiveness(q_tilde, w, historical_coverage, smoothing_alpha=0.0, n_attacks=None):
    """Invert the SUQR exponential at the historical coverage.

    ``q_tilde`` is first smoothed to strict positivity,
    ``(q_tilde * N + alpha) / (N + alpha * n)`` when the attack total ``N``
    is known and ``(q_tilde + alpha) / (1 + alpha * n)`` otherwise; then
    ``phi_i = log q_i - w * p_i``, mean-centered.
    """
    if not w < 0:
        raise ValueError(f"coverage weight w must be negative, got {w}")
    q = np.asarray(q_tilde, dtype=float)
    p = np.asarray(historical_coverage, dtype=float)
    if q.shape != p.shape:
        raise ValueError(f"dimension mismatch: {q.shape} vs {p.shape}")
    n = len(q)
    if n_attacks is not None:
        q = (q * n_attacks + smoothing_alpha) / (n_attacks + smoothing_alpha * n)
    else:
        q = (q + smoothing_alpha) / (1.0 + smoothing_alpha * n)
    if np.any(q <= 0):
        raise ValueError("attack distribution has zero entries; use smoothing_alpha > 0")
    return center(np.log(q) - w * p)


def _alpha(config, game):
    return 1.0 / game.target_count if config.smoothing_alpha is None else config.smoothing_alpha


def recovered_phi(game, w, smoothing_alpha):
    """Counterfactual attractiveness of a game with observed attacks."""
    counts = np.asarray(game.attack_counts, dtype=float)
    return recover_attractiveness(
        empirical_attack_distribution(counts), w, game.historical_coverage,
        smoothing_alpha, n_attacks=counts.sum())


def _check_splits(dataset):
    if not dataset.train:
        raise ValueError("training split is empty")


def fit_input_scaling(games):
    """Per-feature mean and standard deviation over every target row of ``games``."""
    scaler = StandardScaler().fit(np.vstack([g.features for g in games]))
    return scaler.mean_, scaler.scale_


def _initial_model(dataset, config):
    n_features = dataset.train[0].n_features
    model = init_model(n_features, config.hidden_dim, seed=[config.seed, _INIT_STREAM],
                       w_coverage=dataset.w_coverage)
    if config.standardize_inputs:
        model = model.with_input_scaling(*fit_input_scaling(dataset.train))
    return model


def two_stage_loss(model, games, w):
    """Mean cross-entropy between predicted and empirical attacks at the historical coverage."""
    losses = []
    for game in games:
        q_hat = suqr_attack_distribution(game.historical_coverage, forward(model, game.features), w)
        losses.append(cross_entropy_loss(q_hat, empirical_attack_distribution(game.attack_counts)))
    return float(np.mean(losses))


def train_two_stage(dataset, config=TrainConfig(), history=None):
    """Fit the network by cross-entropy with dropout and early stopping.

    Returns the checkpoint with the lowest validation cross-entropy (the
    training loss is monitored when there is no validation split). Per-epoch
    records are appended to ``history`` when a list is given.
    """
    _check_splits(dataset)
    w = dataset.w_coverage
    model = _initial_model(dataset, config)
    monitor = dataset.validation or dataset.train
    rng = np.random.default_rng([config.seed, _TWO_STAGE_STREAM])
    best_loss, best_model, best_epoch = two_stage_loss(model, monitor, w), model, 0
    if history is not None:
        history.append({"epoch": 0, "validation_loss": best_loss})
    state = None
    stale = 0
    for epoch in range(1, config.epochs + 1):
        for index in rng.permutation(len(dataset.train)):
            game = dataset.train[index]
            mask = sample_dropout_mask(rng, (game.target_count, model.hidden_dim), config.dropout_rate)
            phi = forward(model, game.features, mask)
            q_hat = suqr_attack_distribution(game.historical_coverage, phi, w)
            grad_phi = q_hat - empirical_attack_distribution(game.attack_counts)
            grads = backward(model, game.features, grad_phi, mask)
            model, state = apply_update(model, grads, state, config.learning_rate)
        loss = two_stage_loss(model, monitor, w)
        if history is not None:
            history.append({"epoch": epoch, "validation_loss": loss})
        if loss < best_loss:
            best_loss, best_model, best_epoch, stale = loss, model, epoch, 0
        else:
            stale += 1
            if stale >= config.early_stopping_patience:
                break
    logger.debug("two-stage: best epoch %d, validation loss %.4f", best_epoch, best_loss)
    return best_model


def _df_terms(game, model, true_phi, solver_config):
    w = model.w_coverage
    phi_hat = forward(model, game.features)
    report = solve_defender(phi_hat, w, game.defender_values, game.budget, solver_config)
    deu = defender_expected_utility(
        report.coverage, suqr_attack_distribution(report.coverage, true_phi, w),
        game.defender_values)
    grad_phi = chain_gradient(report, phi_hat, true_phi, w, game.defender_values)
    return backward(model, game.features, grad_phi), deu, report


def decision_focused_gradient(game, model, recovered_phi, solver_config=None):
    """Gradient of ``DEU(x*(phi_hat(theta)); recovered_phi)`` for every network parameter.

    This is an ascent direction: following it raises the counterfactual DEU.
    """
    return _df_terms(game, model, recovered_phi, solver_config or SolverConfig())[0]


def _plan(model, game, solver_config):
    phi_hat = forward(model, game.features)
    return solve_defender(phi_hat, model.w_coverage, game.defender_values, game.budget, solver_config)


def _evaluate_reports(reports, games, phis, w):
    deus = []
    for report, game, phi in zip(reports, games, phis):
        q = suqr_attack_distribution(report.coverage, phi, w)
        deus.append(defender_expected_utility(report.coverage, q, game.defender_values))
    return Evaluation(
        deus=np.array(deus),
        coverages=tuple(r.coverage for r in reports),
        solver_failures=sum(not r.converged for r in reports),
    )


def evaluate(model, games, w=None, solver_config=None, phis=None):
    """DEU of planning against ``model`` when the attacker follows the evaluation attractiveness.

    ``phis`` overrides each game's ``true_phi`` (e.g. recovered values on
    historical games).
    """
    w = model.w_coverage if w is None else w
    solver_config = solver_config or SolverConfig()
    if phis is None:
        missing = [i for i, g in enumerate(games) if g.true_phi is None]
        if missing:
            raise ValueError(f"games {missing} carry no evaluation attractiveness")
        phis = [g.true_phi for g in games]
    reports = [
        solve_defender(forward(model, g.features), w, g.defender_values, g.budget, solver_config)
        for g in games
    ]
    return _evaluate_reports(reports, games, phis, w)


def evaluate_uniform(games, w, solver_config=None, phis=None):
    """DEU of the Unif baseline (plan against ``phi = 0``)."""
    solver_config = solver_config or SolverConfig()
    if phis is None:
        missing = [i for i, g in enumerate(games) if g.true_phi is None]
        if missing:
            raise ValueError(f"games {missing} carry no evaluation attractiveness")
        phis = [g.true_phi for g in games]
    reports = [
        solve_defender(np.zeros(g.target_count), w, g.defender_values, g.budget, solver_config)
        for g in games
    ]
    return _evaluate_reports(reports, games, phis, w)


def train_decision_focused(dataset, config=TrainConfig(), solver_config=None, history=None):
    """Train the network by ascending counterfactual DEU through the defender solver.

    Training and validation games are scored against attractiveness
    recovered from their observed attacks. No dropout. Returns the
    checkpoint with the highest validation DEU.
    """
    _check_splits(dataset)
    solver_config = solver_config or SolverConfig()
    w = dataset.w_coverage
    model = _initial_model(dataset, config)
    monitor = dataset.validation or dataset.train
    train_phi = [recovered_phi(g, w, _alpha(config, g)) for g in dataset.train]
    monitor_phi = [recovered_phi(g, w, _alpha(config, g)) for g in monitor]
    rng = np.random.default_rng([config.seed, _DF_STREAM])

    def score(m):
        return evaluate(m, monitor, w, solver_config, phis=monitor_phi).mean

    best_score, best_model, best_epoch = score(model), model, 0
    if history is not None:
        history.append({"epoch": 0, "validation_deu": best_score, "train_deu": None, "skipped": 0})
    state = None
    stale = 0
    for epoch in range(1, config.epochs + 1):
        train_deus = []
        skipped = 0
        for index in rng.permutation(len(dataset.train)):
            game = dataset.train[index]
            try:
                grads, deu, _ = _df_terms(game, model, train_phi[index], solver_config)
            except (SingularKKTError, DegenerateActiveSetError) as exc:
                logger.warning("epoch %d game %d: gradient skipped (%s)", epoch, index, exc)
                skipped += 1
                continue
            train_deus.append(deu)
            ascent = {k: -v for k, v in grads.items()}
            model, state = apply_update(model, ascent, state, config.learning_rate)
        current = score(model)
        if history is not None:
            history.append({
                "epoch": epoch,
                "validation_deu": current,
                "train_deu": float(np.mean(train_deus)) if train_deus else None,
                "skipped": skipped,
            })
        if current > best_score:
            best_score, best_model, best_epoch, stale = current, model, epoch, 0
        else:
            stale += 1
            if stale >= config.early_stopping_patience:
                break
    logger.debug("decision-focused: best epoch %d, validation DEU %.4f", best_epoch, best_score)
    return best_model
