"""Tests for conditional expectations, quasi-bases and the Watatani index."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cstarpert.core.algebra import (
    block_diagonal_algebra,
    diagonal_algebra,
    full_matrix_algebra,
    scalars,
    tensor_left_factor,
)
from cstarpert.core.basic_construction import jones_projection, localize
from cstarpert.core.expectation import (
    QuasiBasis,
    compatibility_residual,
    group_average_expectation,
    induced_quasi_basis,
    izumi_expectation,
    pimsner_popa_audit,
    quasi_basis,
    restrict,
    trace_preserving_expectation,
    uniqueness_check,
    unit_ball_rescale,
    verify,
    watatani_index,
)
from cstarpert.core.matrices import identity, matrix_unit, op_norm, random_unitary_near_identity
from cstarpert.scenarios import PAULI_GROUP
from cstarpert.utils.exceptions import (
    CompatibilityRequired,
    NotIntermediate,
    PreconditionFailed,
    ReconstructionFailed,
)


def test_index_of_scenario(scenario):
    qb = quasi_basis(scenario.base_expectation())
    n = scenario.ambient_dim
    assert_allclose(watatani_index(qb), scenario.expected["index"] * identity(n), atol=1e-8)


def test_reconstruction_of_scenario(scenario):
    qb = quasi_basis(scenario.base_expectation())
    assert qb.reconstruction_residual() <= 1e-8


def test_quasi_basis_gates_reconstruction():
    e = trace_preserving_expectation(full_matrix_algebra(2), scalars(2))
    with pytest.raises(ReconstructionFailed):
        quasi_basis(e, tolerance=-1.0)


def test_base_expectation_is_a_conditional_expectation(scenario):
    assert verify(scenario.base_expectation(), samples=50).passed()


def test_pimsner_popa_inequality(scenario):
    e = scenario.base_expectation()
    assert pimsner_popa_audit(e, quasi_basis(e), trials=50, seed=0) >= -1e-9


def test_matrix_unit_quasi_basis_for_trace():
    e = trace_preserving_expectation(full_matrix_algebra(2), scalars(2))
    qb = QuasiBasis.from_elements([np.sqrt(2) * matrix_unit(2, i, j) for i in range(2) for j in range(2)], e)
    assert qb.reconstruction_residual() <= 1e-12
    assert_allclose(watatani_index(qb), 4 * identity(2), atol=1e-12)
    assert not qb.in_unit_ball


def test_shift_quasi_basis_for_diagonal_projection():
    n = 3
    e = trace_preserving_expectation(full_matrix_algebra(n), diagonal_algebra(n))
    shift = np.roll(identity(n), 1, axis=0)
    powers = [np.linalg.matrix_power(shift, k) for k in range(n)]
    qb = QuasiBasis.from_elements(powers, e)
    assert qb.in_unit_ball
    assert qb.reconstruction_residual() <= 1e-12
    assert_allclose(watatani_index(qb), n * identity(n), atol=1e-12)


def test_index_does_not_depend_on_starting_frame():
    e = trace_preserving_expectation(full_matrix_algebra(3), diagonal_algebra(3))
    u = random_unitary_near_identity(3, 1.2, seed=8)
    rotated = np.einsum("ij,kjl,lm->kim", u, e.source.basis, u.conj().T)
    qb = quasi_basis(e, start_basis=rotated)
    assert qb.reconstruction_residual() <= 1e-8
    assert_allclose(watatani_index(qb), 3 * identity(3), atol=1e-8)


def test_identity_expectation_has_trivial_quasi_basis():
    d = full_matrix_algebra(2)
    qb = quasi_basis(trace_preserving_expectation(d, d))
    assert qb.size == 1
    assert_allclose(watatani_index(qb), identity(2))


def test_unit_ball_rescale_duplicates_elements():
    qb = quasi_basis(trace_preserving_expectation(full_matrix_algebra(2), scalars(2)))
    assert qb.size == 4
    rescaled = unit_ball_rescale(qb)
    assert rescaled.size == 8
    assert rescaled.in_unit_ball
    assert max(op_norm(u) for u in rescaled.elements) <= 1 + 1e-12
    assert rescaled.reconstruction_residual() <= 1e-8
    assert_allclose(watatani_index(rescaled), 4 * identity(2), atol=1e-8)


def test_unit_ball_rescale_keeps_contractive_basis():
    e = trace_preserving_expectation(full_matrix_algebra(3), diagonal_algebra(3))
    shift = np.roll(identity(3), 1, axis=0)
    qb = QuasiBasis.from_elements([np.linalg.matrix_power(shift, k) for k in range(3)], e)
    assert unit_ball_rescale(qb).size == 3


def test_group_average_matches_trace():
    d = full_matrix_algebra(2)
    e_pauli = group_average_expectation(d, PAULI_GROUP)
    e_trace = trace_preserving_expectation(d, scalars(2))
    assert e_pauli.target.dim == 1
    assert uniqueness_check(e_trace, e_trace, e_pauli) <= 1e-8


def test_group_average_rejects_non_unitary():
    with pytest.raises(PreconditionFailed):
        group_average_expectation(full_matrix_algebra(2), [2 * identity(2)])


def test_izumi_expectation_is_trace_preserving(tower):
    qb_ca = quasi_basis(restrict(tower["e_cd"], tower["a"]))
    e_izumi = izumi_expectation(tower["e_cd"], tower["a"], qb_ca)
    assert compatibility_residual(tower["e_cd"], e_izumi) <= 1e-8
    assert uniqueness_check(tower["e_cd"], e_izumi, tower["e_ad"]) <= 1e-8
    assert verify(e_izumi, samples=30).passed()


def test_izumi_expectation_on_block_tower():
    d = full_matrix_algebra(4)
    c = diagonal_algebra(4)
    a = block_diagonal_algebra([2, 2])
    e_cd = trace_preserving_expectation(d, c)
    e_izumi = izumi_expectation(e_cd, a, quasi_basis(restrict(e_cd, a)))
    assert uniqueness_check(e_cd, e_izumi, trace_preserving_expectation(d, a)) <= 1e-8


def test_weighted_expectation_is_valid_but_not_compatible(tower, weighted_expectation):
    assert verify(weighted_expectation, samples=30).passed()
    assert compatibility_residual(tower["e_cd"], weighted_expectation) > 1e-3
    with pytest.raises(CompatibilityRequired):
        jones_projection(localize(tower["e_cd"]), weighted_expectation)


def test_uniqueness_check_rejects_incompatible(tower, weighted_expectation):
    with pytest.raises(PreconditionFailed):
        uniqueness_check(tower["e_cd"], tower["e_ad"], weighted_expectation)


def test_compatibility_requires_intermediate():
    e_cd = trace_preserving_expectation(full_matrix_algebra(2), diagonal_algebra(2))
    e_ad = trace_preserving_expectation(full_matrix_algebra(2), scalars(2))
    with pytest.raises(NotIntermediate):
        compatibility_residual(e_cd, e_ad)


def test_restrict_rejects_non_intermediate():
    e_cd = trace_preserving_expectation(full_matrix_algebra(4), tensor_left_factor(2, 2))
    with pytest.raises(NotIntermediate):
        restrict(e_cd, diagonal_algebra(4))


def test_induced_quasi_basis(tower):
    qb_unit = unit_ball_rescale(quasi_basis(tower["e_cd"]))
    induced = induced_quasi_basis(qb_unit, tower["e_ad"])
    assert induced.in_unit_ball
    assert induced.size == qb_unit.size
    assert induced.reconstruction_residual() <= 1e-8
    assert_allclose(watatani_index(induced), 4 * identity(4), atol=1e-8)
