"""Tests for the perturbation pipeline, distance estimates and clustering."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cstarpert.core.algebra import (
    conjugate,
    diagonal_algebra,
    full_matrix_algebra,
    relative_commutant,
    same_span,
    span_residual,
)
from cstarpert.core.basic_construction import jones_projection, localize
from cstarpert.core.expectation import (
    induced_quasi_basis,
    quasi_basis,
    trace_preserving_expectation,
    unit_ball_rescale,
)
from cstarpert.core.matrices import dagger, identity, is_unitary, op_norm, random_unitary_near_identity
from cstarpert.core.perturbation import (
    close_homomorphism,
    cluster_intermediates,
    compatible_expectation,
    distance_estimate,
    gamma_threshold,
    homomorphism_from_images,
    identity_homomorphism,
    intertwining_unitary,
    jones_distance_bound,
    map_norm_bounds,
    multiplicativity_defect,
    perturb,
    verify_homomorphism,
)
from cstarpert.scenarios import registry
from cstarpert.utils.config import DEFAULT_TOLERANCES
from cstarpert.utils.exceptions import (
    CompatibilityRequired,
    ConjugationFailed,
    NotHomomorphism,
    PreconditionFailed,
    TooFar,
)


def planted(tower, eps, seed):
    commutant = relative_commutant(tower["c"], tower["d"])
    u0 = random_unitary_near_identity(4, eps, seed, commutant.basis)
    return u0, conjugate(tower["a"], u0)


@pytest.mark.parametrize(
    "n, expected",
    [(1, 1e-4), (4, 3.90625e-7), (8, 2.44140625e-8)],
)
def test_gamma_threshold(n, expected):
    assert gamma_threshold(n) == pytest.approx(expected, rel=1e-12)


def test_gamma_threshold_decreases():
    values = [gamma_threshold(n) for n in range(1, 20)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_gamma_threshold_rejects_zero():
    with pytest.raises(ValueError):
        gamma_threshold(0)


def test_map_norm_bounds_of_identity():
    lower, upper = map_norm_bounds(lambda x: x, full_matrix_algebra(2), samples=10, seed=0)
    assert lower == pytest.approx(1.0)
    assert upper == pytest.approx(math.sqrt(2))


def test_multiplicativity_defect_of_a_homomorphism():
    a = full_matrix_algebra(2)
    check = multiplicativity_defect(lambda x: x, identity_homomorphism(a), samples=10, seed=0)
    assert check.lhs <= 1e-12
    assert check.holds()


def test_homomorphism_residuals_detect_non_multiplicative_maps():
    a = full_matrix_algebra(2)
    transpose = homomorphism_from_images(a, a, np.transpose(a.basis, (0, 2, 1)), None)
    assert transpose.unital_residual <= 1e-12
    assert transpose.mult_residual > 0.5


def test_verify_homomorphism_rejects_transpose():
    a = full_matrix_algebra(2)
    transpose = homomorphism_from_images(a, a, np.transpose(a.basis, (0, 2, 1)), None)
    with pytest.raises(NotHomomorphism) as info:
        verify_homomorphism(transpose)
    assert info.value.check == "multiplicativity"
    assert info.value.limit == DEFAULT_TOLERANCES.homomorphism


def test_verify_homomorphism_rejects_map_moving_c():
    a = full_matrix_algebra(2)
    hadamard = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    images = np.einsum("ij,kjl,lm->kim", hadamard, a.basis, hadamard)
    moved = homomorphism_from_images(a, a, images, diagonal_algebra(2))
    assert moved.mult_residual <= 1e-12
    with pytest.raises(NotHomomorphism) as info:
        verify_homomorphism(moved)
    assert info.value.check == "fixes_c"


def test_verify_homomorphism_accepts_identity(tower):
    verify_homomorphism(identity_homomorphism(tower["a"], tower["c"]))


def test_distance_of_equal_algebras(tower):
    estimate = distance_estimate(tower["a"], tower["a"], tower["mod"], tower["e_ad"], tower["e_ad"], samples=10)
    assert estimate.upper <= 1e-12
    assert estimate.lower <= 1e-12


@pytest.mark.parametrize("eps", [1e-3, 1e-1])
def test_distance_bracket(tower, eps):
    _, b = planted(tower, eps, seed=3)
    e_b = trace_preserving_expectation(tower["d"], b)
    estimate = distance_estimate(tower["a"], b, tower["mod"], tower["e_ad"], e_b, samples=20, seed=3)
    assert 0 < estimate.lower <= estimate.upper + 1e-12
    # sweep bound: sqrt(n) * ||a - uau*||_HS / ||a||_HS <= sqrt(4) * 2 eps
    assert estimate.upper <= 4 * eps + 1e-9
    assert estimate.method_notes["upper_source"] in ("jones", "sweep")
    assert estimate.method_notes["index_norm"] == pytest.approx(16.0)
    assert estimate.method_notes["sweep_sampled"] <= estimate.method_notes["sweep_bound"] + 1e-12
    assert "witness_bound" not in estimate.method_notes


@pytest.mark.parametrize("eps", [1e-3, 1e-6, 1e-9])
def test_distance_with_witness_is_within_twice_eps(tower, eps):
    u0, b = planted(tower, eps, seed=3)
    e_b = trace_preserving_expectation(tower["d"], b)
    estimate = distance_estimate(tower["a"], b, tower["mod"], tower["e_ad"], e_b, samples=20, seed=3, witness=u0)
    assert estimate.method_notes["witness_bound"] == pytest.approx(2 * eps, abs=1e-12)
    assert estimate.upper <= 2 * eps + 1e-9
    assert estimate.lower <= estimate.upper + 1e-12


def test_distance_rejects_a_witness_that_does_not_conjugate(tower):
    _, b = planted(tower, 1e-1, seed=3)
    e_b = trace_preserving_expectation(tower["d"], b)
    with pytest.raises(PreconditionFailed, match="carry A onto B"):
        distance_estimate(tower["a"], b, tower["mod"], tower["e_ad"], e_b, samples=5, witness=identity(4))
    with pytest.raises(PreconditionFailed, match="not unitary"):
        distance_estimate(tower["a"], b, tower["mod"], tower["e_ad"], e_b, samples=5, witness=2 * identity(4))


def test_compatible_expectation_rejects_weighted(tower, weighted_expectation):
    with pytest.raises(CompatibilityRequired):
        compatible_expectation(tower["e_cd"], tower["a"], weighted_expectation, DEFAULT_TOLERANCES)


def test_close_homomorphism_needs_unit_ball(tower):
    qb = quasi_basis(tower["e_cd"])
    with pytest.raises(PreconditionFailed):
        close_homomorphism(tower["mod"], tower["a"], tower["a"], tower["e_ad"], tower["e_ad"], qb)


def test_close_homomorphism_on_equal_algebras(tower):
    qb_unit = unit_ball_rescale(quasi_basis(tower["e_cd"]))
    psi = close_homomorphism(tower["mod"], tower["a"], tower["a"], tower["e_ad"], tower["e_ad"], qb_unit)
    assert psi.diagnostics["delta"] <= 1e-9
    assert psi.diagnostics["n_basis"] == 64
    assert psi.mult_residual <= 1e-8
    assert psi.unital_residual <= 1e-8
    assert_allclose(psi.apply_many(tower["a"].basis), tower["a"].basis, atol=1e-8)


def test_close_homomorphism_too_far(tower):
    qb_unit = unit_ball_rescale(quasi_basis(tower["e_cd"]))
    with pytest.raises(TooFar) as info:
        close_homomorphism(tower["mod"], tower["a"], tower["b"], tower["e_ad"], tower["e_bd"], qb_unit)
    assert info.value.stage == "close_homomorphism"
    assert info.value.value == pytest.approx(0.75, abs=1e-9)


def test_intertwining_unitary_recovers_inner_automorphism(tower):
    u0, b = planted(tower, 1e-2, seed=5)
    a = tower["a"]
    images = np.einsum("ij,kjl,lm->kim", u0, a.basis, dagger(u0))
    phi1 = homomorphism_from_images(a, b, images, tower["c"])
    qb_unit = unit_ball_rescale(quasi_basis(tower["e_cd"]))
    qb_a = induced_quasi_basis(qb_unit, tower["e_ad"])
    inter = intertwining_unitary(phi1, identity_homomorphism(a, tower["c"]), qb_a, tower["c"], samples=10)
    assert is_unitary(inter.unitary)
    assert inter.s_gap < 1
    assert inter.intertwining_residual <= 1e-9
    assert same_span(conjugate(a, inter.unitary), b, tol=1e-8)


def test_intertwining_unitary_rejects_non_homomorphism(tower):
    a = tower["a"]
    transpose = homomorphism_from_images(a, a, np.transpose(a.basis, (0, 2, 1)), tower["c"])
    qb_a = induced_quasi_basis(unit_ball_rescale(quasi_basis(tower["e_cd"])), tower["e_ad"])
    with pytest.raises(PreconditionFailed) as info:
        intertwining_unitary(transpose, identity_homomorphism(a, tower["c"]), qb_a, tower["c"], samples=5)
    assert "phi1" in info.value.reason


def test_perturb_identity_case(tower):
    report = perturb(tower["c"], tower["d"], tower["e_cd"], tower["a"], tower["a"], samples=20)
    assert_allclose(report.unitary, identity(4), atol=1e-8)
    assert report.conjugation_residual <= 1e-9
    assert report.d_estimate.upper <= 1e-12
    assert report.gamma_satisfied
    assert report.violations() == []


@pytest.mark.parametrize("eps", [1e-3, 1e-6, 1e-9])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_perturb_recovers_planted_unitary(tower, eps, seed):
    u0, b = planted(tower, eps, seed)
    report = perturb(tower["c"], tower["d"], tower["e_cd"], tower["a"], b, samples=20, seed=seed)
    u = report.unitary
    assert is_unitary(u)
    assert report.conjugation_residual <= 1e-7
    assert same_span(conjugate(tower["a"], u), b, tol=1e-7)
    assert report.u_commutes_with_c_residual <= 1e-8
    assert report.u_in_generated_residual <= 1e-7
    assert report.n_quasi_basis == 64
    assert report.gamma == gamma_threshold(64)
    assert report.psi_bound_lhs <= report.psi_bound_rhs + 1e-7
    assert report.psi_bound_lhs <= report.psi_bound_certified + 1e-12
    assert report.u_bound_lhs <= report.u_bound_rhs + 1e-7
    assert report.delta < 0.5
    assert report.violations() == []
    assert {b.name for b in report.bounds} >= {
        "close_homomorphism",
        "delta_chain",
        "intertwiner",
        "jones_distance",
        "multiplicativity_defect",
        "expectation_vs_inclusion",
        "conjugated_distance",
    }


TOWERS = ["diag-tower-M2", "M2-in-M4-tower", "M2-in-M6-tower", "M3-in-M6-tower"]

TOWER_SWEEP = [
    (name, eps, seed)
    for name, seeds in (("diag-tower-M2", 4), ("M2-in-M6-tower", 2), ("M3-in-M6-tower", 2))
    for eps in (1e-3, 1e-6, 1e-9)
    for seed in range(seeds)
]


def assert_recovered(report, a, b, n_basis):
    assert is_unitary(report.unitary)
    assert report.conjugation_residual <= 1e-7
    assert same_span(conjugate(a, report.unitary), b, tol=1e-7)
    assert report.u_commutes_with_c_residual <= 1e-8
    assert report.u_in_generated_residual <= 1e-7
    assert report.n_quasi_basis == n_basis
    assert report.psi_bound_lhs <= report.psi_bound_rhs + 1e-7
    assert report.u_bound_lhs <= report.u_bound_rhs + 1e-7
    assert report.violations() == []


@pytest.mark.parametrize("name", [name for name in registry.list_names() if "tower" in name])
def test_jones_distance_bound_on_catalog_towers(name):
    s = registry.get(name)()
    e_cd = s.base_expectation()
    mod = localize(e_cd)
    index_norm = op_norm(quasi_basis(e_cd).index_element)
    u = random_unitary_near_identity(s.ambient_dim, 0.05, 0, relative_commutant(s.c, s.d).basis)
    e_a = jones_projection(mod, trace_preserving_expectation(s.d, s.a))
    for b in (conjugate(s.a, u), *s.alternatives):
        e_bd = trace_preserving_expectation(s.d, b)
        gap = (e_a - jones_projection(mod, e_bd)).norm()
        check = jones_distance_bound(s.a, e_bd, gap, index_norm, samples=100, seed=0)
        assert check.holds()


@pytest.mark.parametrize("name", TOWERS)
def test_recover_on_catalog_towers(toolkit, name):
    result = toolkit.recover(name, 1e-3, seed=0)
    a = result.scenario.a
    b = conjugate(a, result.planted)
    assert span_residual(b, a) > 1e-6
    n = result.scenario.ambient_dim
    assert_recovered(result.report, a, b, n_basis=n**3)


@pytest.mark.slow
@pytest.mark.parametrize("eps", [1e-3, 1e-6, 1e-9])
@pytest.mark.parametrize("seed", range(10))
def test_perturb_recovers_planted_unitary_many_seeds(tower, eps, seed):
    _, b = planted(tower, eps, seed)
    report = perturb(tower["c"], tower["d"], tower["e_cd"], tower["a"], b, samples=50, seed=seed)
    assert_recovered(report, tower["a"], b, n_basis=64)


@pytest.mark.slow
@pytest.mark.parametrize("name, eps, seed", TOWER_SWEEP)
def test_recover_sweep_over_catalog_towers(toolkit, name, eps, seed):
    result = toolkit.recover(name, eps, seed)
    a = result.scenario.a
    b = conjugate(a, result.planted)
    assert_recovered(result.report, a, b, n_basis=result.scenario.ambient_dim ** 3)


def test_perturb_rejects_unitary_outside_generated_algebra(tower, monkeypatch):
    _, b = planted(tower, 1e-3, seed=0)
    monkeypatch.setattr("cstarpert.core.perturbation.generated_by", lambda a, other: a)
    with pytest.raises(ConjugationFailed) as info:
        perturb(tower["c"], tower["d"], tower["e_cd"], tower["a"], b, samples=5)
    assert info.value.residual > DEFAULT_TOLERANCES.membership


def test_perturb_too_far(tower):
    with pytest.raises(TooFar) as info:
        perturb(tower["c"], tower["d"], tower["e_cd"], tower["a"], tower["b"], samples=10)
    assert info.value.stage == "close_homomorphism"


def test_perturb_with_nontrivial_base_algebra(toolkit):
    result = toolkit.recover("diag-tower-M4", 1e-3, seed=4)
    report = result.report
    assert report.conjugation_residual <= 1e-7
    assert report.u_commutes_with_c_residual <= 1e-8


def test_timings_cover_every_stage(tower):
    report = perturb(tower["c"], tower["d"], tower["e_cd"], tower["a"], tower["a"], samples=5)
    assert set(report.timings) == {
        "expectations",
        "quasi_basis",
        "distance",
        "close_homomorphism",
        "intertwining_unitary",
        "verification",
        "audit",
    }


def test_cluster_separates_far_intermediates(toolkit):
    report = toolkit.cluster("M2-in-M4-tower", 1e-6, seed=0)
    assert report.classes == [[0, 1], [2]]
    statuses = {(p.i, p.j): p.status for p in report.pairs}
    assert statuses[(0, 1)] == "conjugate"
    assert statuses[(0, 2)] in ("too_far", "not_attempted")
    assert statuses[(1, 2)] in ("too_far", "not_attempted")
    assert (0, 1) in report.witnesses
    assert report.jones_distances[0, 2] == pytest.approx(1.0, abs=1e-6)
    assert report.epsilon == pytest.approx(1 / (2 * 640.0**4 * 16))


def test_cluster_is_deterministic(toolkit):
    first = toolkit.cluster("M2-in-M4-tower", 1e-6, seed=1)
    second = toolkit.cluster("M2-in-M4-tower", 1e-6, seed=1)
    assert first.classes == second.classes
    assert_allclose(first.jones_distances, second.jones_distances)


def test_cluster_intermediates_skips_distant_pairs(tower):
    entries = [(tower["a"], tower["e_ad"]), (tower["a"], tower["e_ad"]), (tower["b"], tower["e_bd"])]
    report = cluster_intermediates(entries, tower["mod"], attempt_below=0.5, samples=10)
    assert report.classes == [[0, 1], [2]]
    statuses = {(p.i, p.j): p.status for p in report.pairs}
    assert statuses == {(0, 1): "conjugate", (0, 2): "not_attempted", (1, 2): "not_attempted"}
    assert_allclose(report.witnesses[(0, 1)], identity(4), atol=1e-7)


def test_cluster_intermediates_reports_incompatible_entry(tower, weighted_expectation):
    entries = [(tower["a"], tower["e_ad"]), (tower["a"], weighted_expectation)]
    report = cluster_intermediates(entries, tower["mod"], samples=10)
    assert report.classes == [[0], [1]]
    assert report.pairs[0].status == "entry_error"
    assert np.isnan(report.jones_distances[0, 1])
