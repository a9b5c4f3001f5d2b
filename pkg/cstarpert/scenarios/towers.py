"""Three-level towers C <= A <= D with a proper intermediate algebra."""

from cstarpert.core.algebra import (
    block_diagonal_algebra,
    diagonal_algebra,
    full_matrix_algebra,
    scalars,
    tensor_left_factor,
    tensor_right_factor,
)
from cstarpert.scenarios.base import Scenario


def tensor_tower(k: int, m: int) -> Scenario:
    """
    C I <= M_k (x) I_m <= M_km.

    For k == m the flipped factor I (x) M_k is isomorphic to A but far from
    it, and is kept as a second intermediate algebra.
    """
    n = k * m
    alternatives = (tensor_right_factor(k, m),) if k == m else ()
    return Scenario(
        name=f"M{k}-in-M{n}-tower",
        c=scalars(n),
        a=tensor_left_factor(k, m),
        d=full_matrix_algebra(n),
        description=f"Scalars <= M_{k} (x) I_{m} <= M_{n}",
        expected={"index": float(n * n)},
        alternatives=alternatives,
    )


def masa_tower() -> Scenario:
    """C I <= D_2 <= M_2: the smallest tower whose intermediate algebra moves under C' n D."""
    return Scenario(
        name="diag-tower-M2",
        c=scalars(2),
        a=diagonal_algebra(2),
        d=full_matrix_algebra(2),
        description="Scalars <= diagonal <= M_2",
        expected={"index": 4.0},
    )


def block_tower() -> Scenario:
    """D_4 <= M_2 (+) M_2 <= M_4, with M_1 (+) M_3 as a second intermediate algebra."""
    return Scenario(
        name="diag-tower-M4",
        c=diagonal_algebra(4),
        a=block_diagonal_algebra([2, 2]),
        d=full_matrix_algebra(4),
        description="Diagonal <= M_2 (+) M_2 <= M_4",
        expected={"index": 4.0},
        alternatives=(block_diagonal_algebra([1, 3]),),
    )
