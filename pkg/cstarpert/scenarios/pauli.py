"""Fixed points of the Pauli group acting on M_2 by conjugation."""

import numpy as np

from cstarpert.core.algebra import full_matrix_algebra, scalars
from cstarpert.core.expectation import group_average_expectation
from cstarpert.scenarios.base import Scenario

PAULI_GROUP = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=np.complex128,
)


def _pauli_average(d, c):
    return group_average_expectation(d, PAULI_GROUP)


def pauli_fixed_points() -> Scenario:
    """The fixed algebra is C I and the averaged expectation has Index = 4 I."""
    d = full_matrix_algebra(2)
    return Scenario(
        name="pauli-fixed-in-M2",
        c=scalars(2),
        a=d,
        d=d,
        description="Fixed points of conjugation by {I, X, Y, Z} inside M_2, group-averaged expectation",
        expected={"index": 4.0},
        expectation_builder=_pauli_average,
    )
