"""How many benchmark tasks must a model train on to top a leaderboard?"""

from leadrig.aggregation import Leaderboard, Rule, leaderboard
from leadrig.errors import InputError, ResourceLimitError, SolverBudgetExceeded
from leadrig.robustness import RobustnessResult, all_targets, brute_force_k, robustness
from leadrig.scores import (
    DEFAULT_CAPS,
    GainCaps,
    ScoreMatrix,
    TieBreakPolicy,
    TrainingScenario,
    apply_training,
)

__all__ = [
    "DEFAULT_CAPS",
    "GainCaps",
    "InputError",
    "Leaderboard",
    "ResourceLimitError",
    "RobustnessResult",
    "Rule",
    "ScoreMatrix",
    "SolverBudgetExceeded",
    "TieBreakPolicy",
    "TrainingScenario",
    "all_targets",
    "apply_training",
    "brute_force_k",
    "leaderboard",
    "robustness",
]
