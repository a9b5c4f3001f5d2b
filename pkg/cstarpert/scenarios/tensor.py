"""Tensor-factor inclusions M_k (x) I_m <= M_{km}."""

from cstarpert.core.algebra import full_matrix_algebra, tensor_left_factor
from cstarpert.scenarios.base import Scenario


def left_factor_in_full(k: int, m: int) -> Scenario:
    """M_k (x) I_m <= M_{km}; the trace-preserving expectation has Index = m^2 I."""
    d = full_matrix_algebra(k * m)
    return Scenario(
        name=f"M{k}-in-M{k * m}",
        c=tensor_left_factor(k, m),
        a=d,
        d=d,
        description=f"M_{k} (x) I_{m} inside M_{k * m}",
        expected={"index": float(m * m)},
    )
