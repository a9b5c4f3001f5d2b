"""Shared utilities."""

from cstarpert.utils.exceptions import (
    CStarPertError,
    NumericalBreakdown,
    TooFar,
    UnknownScenarioError,
)

__all__ = [
    "CStarPertError",
    "NumericalBreakdown",
    "TooFar",
    "UnknownScenarioError",
]
