"""Input validation utilities."""

import math

from cstarpert.utils.exceptions import EpsOutOfRange


def validate_eps(eps: float) -> float:
    """Validate a planted distance eps in [0, 2)."""
    eps = float(eps)
    if math.isnan(eps) or eps < 0 or eps >= 2:
        raise EpsOutOfRange(eps)
    return eps


def validate_positive(name: str, value: int) -> int:
    """Validate a count such as trials or samples."""
    value = int(value)
    if value < 1:
        raise ValueError(f"{name} must be at least 1, got {value}")
    return value


def validate_tolerance(tol: float) -> float:
    tol = float(tol)
    if not (tol > 0 and math.isfinite(tol)):
        raise ValueError(f"Tolerance must be a positive number, got {tol}")
    return tol
