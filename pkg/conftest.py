"""Shared pytest fixtures."""

import numpy as np
import pytest

from cstarpert import Toolkit
from cstarpert.core.algebra import full_matrix_algebra, scalars, tensor_left_factor, tensor_right_factor
from cstarpert.core.basic_construction import localize
from cstarpert.core.expectation import from_linear_map, trace_preserving_expectation
from cstarpert.core.matrices import identity
from cstarpert.scenarios import registry

CATALOG = registry.list_names()


@pytest.fixture
def toolkit():
    return Toolkit(samples=30)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=CATALOG)
def scenario(request):
    return registry.get(request.param)()


@pytest.fixture(scope="module")
def tower():
    """scalars <= M_2 (x) I <= M_4 with the trace-preserving expectations."""
    c = scalars(4)
    a = tensor_left_factor(2, 2)
    b = tensor_right_factor(2, 2)
    d = full_matrix_algebra(4)
    e_cd = trace_preserving_expectation(d, c)
    return {
        "c": c,
        "a": a,
        "b": b,
        "d": d,
        "e_cd": e_cd,
        "e_ad": trace_preserving_expectation(d, a),
        "e_bd": trace_preserving_expectation(d, b),
        "mod": localize(e_cd),
    }


@pytest.fixture
def weighted_expectation(tower):
    """E(a (x) b) = a * (0.8 b_00 + 0.2 b_11): a valid expectation onto M_2 (x) I that ignores the trace."""
    weights = np.array([0.8, 0.2])

    def partial_trace(x):
        reduced = np.einsum("ikjk,k->ij", x.reshape(2, 2, 2, 2), weights)
        return np.kron(reduced, identity(2))

    return from_linear_map(tower["d"], tower["a"], partial_trace)
