"""Reputation-enforced packet forwarding as an evolutionary game.

Closed-form game quantities live in :mod:`repfwd.game`, mean-field analysis in
:mod:`repfwd.dynamics`, the agent-based simulator in :mod:`repfwd.abm` and the
command-line tool in :mod:`repfwd.cli`.
"""
__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .game import (  # noqa: E402
    ConfigError,
    GameParams,
    LinkBreakMatrix,
    NumericalError,
    REFERENCE_LINKS,
    Reputation,
    ReputationState,
    Strategy,
    StrategyDistribution,
)

__all__ = [
    "BACKEND",
    "ConfigError",
    "GameParams",
    "LinkBreakMatrix",
    "NumericalError",
    "REFERENCE_LINKS",
    "Reputation",
    "ReputationState",
    "Strategy",
    "StrategyDistribution",
]
