"""Tests for the JSON codecs."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cstarpert.core.algebra import diagonal_algebra, full_matrix_algebra, same_span, tensor_left_factor
from cstarpert.core.basic_construction import jones_projection
from cstarpert.core.expectation import trace_preserving_expectation
from cstarpert.core.matrices import identity
from cstarpert.utils.exceptions import DimensionMismatch, PreconditionFailed
from cstarpert.utils.serialization import (
    dumps,
    expectation_to_json,
    matrix_from_json,
    matrix_to_json,
    module_operator_to_json,
    subalgebra_from_json,
    subalgebra_to_json,
)


def through_text(data):
    return json.loads(json.dumps(data))


def test_matrix_survives_json_text(rng):
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert_array_equal(matrix_from_json(through_text(matrix_to_json(m))), m)


def test_matrix_from_json_rejects_wrong_shape():
    with pytest.raises(DimensionMismatch):
        matrix_from_json({"dim": 3, "re": [[0.0, 0.0], [0.0, 0.0]], "im": [[0.0, 0.0], [0.0, 0.0]]})


def test_subalgebra_survives_json_text():
    alg = tensor_left_factor(2, 2)
    back = subalgebra_from_json(through_text(subalgebra_to_json(alg)))
    assert back.ambient_dim == 4
    assert back.dim == 4
    assert same_span(back, alg)


def test_subalgebra_from_json_rejects_non_orthonormal_basis():
    data = {"ambient_dim": 2, "basis": [matrix_to_json(2 * identity(2))]}
    with pytest.raises(PreconditionFailed, match="orthonormal"):
        subalgebra_from_json(data)


def test_subalgebra_from_json_rejects_empty_basis():
    with pytest.raises(PreconditionFailed, match="empty"):
        subalgebra_from_json({"ambient_dim": 2, "basis": []})


def test_expectation_to_json_carries_both_algebras():
    e = trace_preserving_expectation(full_matrix_algebra(2), diagonal_algebra(2))
    data = through_text(expectation_to_json(e))
    assert same_span(subalgebra_from_json(data["source"]), full_matrix_algebra(2))
    assert same_span(subalgebra_from_json(data["target"]), diagonal_algebra(2))
    assert data["matrix"]["rows"] == 4
    assert_allclose(np.asarray(data["matrix"]["re"]) + 1j * np.asarray(data["matrix"]["im"]), e.matrix)


def test_module_operator_to_json_carries_module_hash(tower):
    e_c = jones_projection(tower["mod"], tower["e_cd"])
    data = through_text(module_operator_to_json(e_c))
    assert data["module_hash"] == tower["mod"].content_hash()
    assert_array_equal(matrix_from_json(data["matrix"]), e_c.matrix)


def test_dumps_converts_numpy_values():
    text = dumps({"n": np.int64(3), "x": np.float64(0.5), "ok": np.bool_(True), "m": identity(2)})
    data = json.loads(text)
    assert data["n"] == 3
    assert data["ok"] is True
    assert matrix_from_json(data["m"]).shape == (2, 2)
