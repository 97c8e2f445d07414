"""Decision-focused learning of attacker behavior in Stackelberg security games."""

__version__ = "0.1.0"

from .datagen import GenConfig, generate_instance, load_games, save_games
from .estimators import DecisionFocusedSUQR, TwoStageSUQR, UniformDefender
from .game import (
    Dataset,
    SecurityGame,
    defender_expected_utility,
    deu_gradient,
    deu_hessian,
    suqr_attack_distribution,
)
from .learning import TrainConfig, evaluate, train_decision_focused, train_two_stage
from .model import ValueModel, forward, init_model, load_model, save_model
from .solver import SolverConfig, solve_defender

__all__ = [
    "Dataset",
    "DecisionFocusedSUQR",
    "GenConfig",
    "SecurityGame",
    "SolverConfig",
    "TrainConfig",
    "TwoStageSUQR",
    "UniformDefender",
    "ValueModel",
    "defender_expected_utility",
    "deu_gradient",
    "deu_hessian",
    "evaluate",
    "forward",
    "generate_instance",
    "init_model",
    "load_games",
    "load_model",
    "save_games",
    "save_model",
    "solve_defender",
    "suqr_attack_distribution",
    "train_decision_focused",
    "train_two_stage",
]
