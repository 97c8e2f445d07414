"""scikit-learn style wrappers around the trainers.

Estimators are fitted on games (a :class:`~dfssg.game.Dataset` or a list of
training games) rather than on a flat design matrix. ``predict`` maps one
game's feature matrix to mean-centered attractiveness, ``plan`` returns the
defender coverage, and ``score`` is the mean DEU on evaluation games.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .game import Dataset
from .learning import (
    TrainConfig,
    evaluate,
    evaluate_uniform,
    train_decision_focused,
    train_two_stage,
)
from .model import forward
from .solver import SolverConfig, solve_defender


def as_dataset(games, validation=None, w_coverage=-4.0):
    """Coerce ``games`` to a Dataset; a plain list becomes the training split."""
    if isinstance(games, Dataset):
        if validation is not None:
            raise ValueError("pass validation games inside the Dataset")
        return games
    games = list(games)
    if not games:
        raise ValueError("no training games")
    return Dataset(games, list(validation or []), [], w_coverage=w_coverage)


def check_games(games, need_phi=True):
    games = list(games)
    if not games:
        raise ValueError("no games given")
    if need_phi:
        missing = [i for i, g in enumerate(games) if g.true_phi is None]
        if missing:
            raise ValueError(f"games {missing} carry no evaluation attractiveness")
    return games


class _ValueModelEstimator(BaseEstimator):
    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            early_stopping_patience=self.early_stopping_patience,
            dropout_rate=getattr(self, "dropout_rate", 0.0),
            smoothing_alpha=self.smoothing_alpha,
            hidden_dim=self.hidden_dim,
            standardize_inputs=self.standardize_inputs,
            seed=self.seed,
        )

    def _solver(self):
        return self.solver_config or SolverConfig()

    def predict(self, features):
        """Mean-centered attractiveness for each row of one game's feature matrix."""
        check_is_fitted(self, "model_")
        y = check_array(features, dtype=np.float64)
        return forward(self.model_, y)

    def plan(self, game):
        """Defender solve against the predicted attractiveness of ``game``."""
        check_is_fitted(self, "model_")
        return solve_defender(self.predict(game.features), self.model_.w_coverage,
                              game.defender_values, game.budget, self._solver())

    def evaluate(self, games):
        check_is_fitted(self, "model_")
        return evaluate(self.model_, check_games(games), solver_config=self._solver())

    def score(self, games, y=None):
        """Mean DEU on ``games`` under their evaluation attractiveness (higher is better)."""
        return self.evaluate(games).mean


class TwoStageSUQR(_ValueModelEstimator):
    """Fit attractiveness by cross-entropy against observed attacks."""

    def __init__(self, hidden_dim=200, epochs=100, learning_rate=1e-3,
                 early_stopping_patience=10, dropout_rate=0.5, smoothing_alpha=None,
                 standardize_inputs=True, w_coverage=-4.0, solver_config=None, seed=0):
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.early_stopping_patience = early_stopping_patience
        self.dropout_rate = dropout_rate
        self.smoothing_alpha = smoothing_alpha
        self.standardize_inputs = standardize_inputs
        self.w_coverage = w_coverage
        self.solver_config = solver_config
        self.seed = seed

    def fit(self, games, y=None, validation=None):
        dataset = as_dataset(games, validation, self.w_coverage)
        self.history_ = []
        self.model_ = train_two_stage(dataset, self._train_config(), history=self.history_)
        self.n_features_in_ = self.model_.input_dim
        return self


class DecisionFocusedSUQR(_ValueModelEstimator):
    """Fit attractiveness by ascending counterfactual DEU through the defender solver."""

    def __init__(self, hidden_dim=200, epochs=100, learning_rate=1e-3,
                 early_stopping_patience=10, smoothing_alpha=None, standardize_inputs=True,
                 w_coverage=-4.0, solver_config=None, seed=0):
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.early_stopping_patience = early_stopping_patience
        self.smoothing_alpha = smoothing_alpha
        self.standardize_inputs = standardize_inputs
        self.w_coverage = w_coverage
        self.solver_config = solver_config
        self.seed = seed

    def fit(self, games, y=None, validation=None):
        dataset = as_dataset(games, validation, self.w_coverage)
        self.history_ = []
        self.model_ = train_decision_focused(dataset, self._train_config(), self._solver(),
                                             history=self.history_)
        self.n_features_in_ = self.model_.input_dim
        return self


class UniformDefender(BaseEstimator):
    """Baseline that treats every target as equally attractive."""

    def __init__(self, w_coverage=-4.0, solver_config=None):
        self.w_coverage = w_coverage
        self.solver_config = solver_config

    def fit(self, games=None, y=None):
        if isinstance(games, Dataset):
            self.w_ = games.w_coverage
        else:
            self.w_ = self.w_coverage
        return self

    def predict(self, features):
        check_is_fitted(self, "w_")
        return np.zeros(check_array(features, dtype=np.float64).shape[0])

    def plan(self, game):
        check_is_fitted(self, "w_")
        return solve_defender(np.zeros(game.target_count), self.w_, game.defender_values,
                              game.budget, self.solver_config or SolverConfig())

    def evaluate(self, games):
        check_is_fitted(self, "w_")
        return evaluate_uniform(check_games(games), self.w_, self.solver_config)

    def score(self, games, y=None):
        return self.evaluate(games).mean
