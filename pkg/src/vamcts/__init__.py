"""Variance-aware Monte Carlo tree search.

Seven tree policies (UCT1, PUCT, UCT-P, UCT-V, UCT-V-H, UCT-V-P, PUCT-V), a
numerical check of each against its regularized policy optimization
objective, toy environments and a CSV experiment harness.
"""

from .backprop import MinMaxStats, StructuralError, backpropagate, normalize_value, welford_update
from .core import (ALL_RULES, ChildStatsView, InvalidActionSet, NodeStats, PriorDistribution,
                   Rule, SelectorParams, empirical_pi)
from .engine import (EnvironmentModel, SearchConfig, SearchTree, TerminalRootError,
                     VarianceSource, act, run_search)
from .selectors import SCORERS, score_breakdown, scores, select_action

__version__ = "0.1.0"

__all__ = [
    "ALL_RULES",
    "ChildStatsView",
    "EnvironmentModel",
    "InvalidActionSet",
    "MinMaxStats",
    "NodeStats",
    "PriorDistribution",
    "Rule",
    "SCORERS",
    "SearchConfig",
    "SearchTree",
    "SelectorParams",
    "StructuralError",
    "TerminalRootError",
    "VarianceSource",
    "act",
    "backpropagate",
    "empirical_pi",
    "normalize_value",
    "run_search",
    "score_breakdown",
    "scores",
    "select_action",
    "welford_update",
]
