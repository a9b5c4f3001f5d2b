"""Scalars inside a full matrix algebra."""

from cstarpert.core.algebra import full_matrix_algebra, scalars
from cstarpert.scenarios.base import Scenario


def scalars_in_full(n: int) -> Scenario:
    """C I <= M_n with the trace; Index = n^2 I."""
    d = full_matrix_algebra(n)
    return Scenario(
        name=f"scalars-in-M{n}",
        c=scalars(n),
        a=d,
        d=d,
        description=f"Scalars inside M_{n} with the normalized trace",
        expected={"index": float(n * n)},
    )
