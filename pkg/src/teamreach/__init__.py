"""Solvers for team concurrent stochastic reachability games.

The team randomises independently against a single opponent. Submodules:
``game`` and ``model_io`` (structures and documents), ``one_shot`` (local
games), ``vi`` (value iteration and certification), ``smt_bridge``,
``almost_sure``, ``iratl`` (logic), ``bench_gen`` and ``cli``.
"""
from .game import Game, MemorylessProfile, InvalidGameError, validate
from .model_io import parse_game, serialize_game
from .vi import value_iteration, certify, decide_threshold_vi
from .almost_sure import solve_almost_sure, brute_force_almost_sure
from .iratl import parse_formula, satisfying_states

__version__ = "0.1.0"

__all__ = [
    "Game", "MemorylessProfile", "InvalidGameError", "validate",
    "parse_game", "serialize_game",
    "value_iteration", "certify", "decide_threshold_vi",
    "solve_almost_sure", "brute_force_almost_sure",
    "parse_formula", "satisfying_states",
]
