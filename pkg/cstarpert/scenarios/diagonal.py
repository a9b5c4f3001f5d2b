"""Diagonal masas inside M_n."""

from cstarpert.core.algebra import diagonal_algebra, full_matrix_algebra
from cstarpert.scenarios.base import Scenario


def diagonal_in_full(n: int) -> Scenario:
    """D_n <= M_n with the diagonal projection; Index = n I."""
    d = full_matrix_algebra(n)
    return Scenario(
        name=f"diag-in-M{n}",
        c=diagonal_algebra(n),
        a=d,
        d=d,
        description=f"Diagonal matrices inside M_{n}",
        expected={"index": float(n)},
    )
