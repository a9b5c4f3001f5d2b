"""Tests for the scenario catalog and the toolkit facade."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cstarpert import Toolkit
from cstarpert.core.algebra import conjugate, diagonal_algebra, full_matrix_algebra, same_span
from cstarpert.core.matrices import identity, op_norm
from cstarpert.scenarios import catalog, registry
from cstarpert.scenarios.base import Scenario
from cstarpert.utils.exceptions import EpsOutOfRange, NotNested, UnknownScenarioError

REQUIRED = [
    "scalars-in-M2",
    "scalars-in-M3",
    "diag-in-M3",
    "M2-in-M4",
    "M2-in-M6",
    "pauli-fixed-in-M2",
    "M2-in-M4-tower",
]


def test_catalog_contains_required_scenarios():
    names = registry.list_names()
    for name in REQUIRED:
        assert name in names
    assert names == sorted(names)


def test_catalog_builds_every_scenario():
    built = catalog()
    assert [s.name for s in built] == registry.list_names()


def test_scenarios_are_nested(scenario):
    scenario.check()
    assert scenario.expected["index"] >= 1


def test_registry_lookup():
    assert registry.has_name("M2-in-M4")
    assert not registry.has_name("M5-in-M7")
    assert registry.get("M5-in-M7") is None


def test_check_rejects_non_nested():
    bad = Scenario(
        name="bad",
        c=full_matrix_algebra(2),
        a=diagonal_algebra(2),
        d=full_matrix_algebra(2),
        description="full matrices are not inside the diagonal",
    )
    with pytest.raises(NotNested):
        bad.check()


def test_toolkit_unknown_scenario(toolkit):
    with pytest.raises(UnknownScenarioError) as info:
        toolkit.scenario("nope")
    assert "M2-in-M4" in info.value.available


def test_toolkit_index(toolkit):
    assert_allclose(toolkit.index("M2-in-M6"), 9 * identity(6), atol=1e-8)


def test_toolkit_unit_ball_quasi_basis(toolkit):
    qb = toolkit.quasi_basis("scalars-in-M3", unit_ball=True)
    assert qb.in_unit_ball
    # frame elements sqrt(3) e_ij need K = 3 copies each
    assert qb.size == 27


def test_toolkit_plant_stays_in_commutant(toolkit):
    scenario = toolkit.scenario("diag-in-M3")
    u0 = toolkit.plant(scenario, 0.3, seed=1)
    assert_allclose(u0, np.diag(np.diag(u0)), atol=1e-12)
    assert op_norm(u0 - identity(3)) == pytest.approx(0.3, rel=1e-9)


def test_toolkit_plant_rejects_large_eps(toolkit):
    with pytest.raises(EpsOutOfRange):
        toolkit.plant(toolkit.scenario("diag-in-M3"), 2.5, seed=0)


def test_toolkit_recover(toolkit):
    result = toolkit.recover("M2-in-M4-tower", 1e-4, seed=7)
    a = result.scenario.a
    assert result.report.conjugation_residual <= 1e-7
    # u and u0 may differ by a unitary of the commutant of A
    assert same_span(conjugate(a, result.report.unitary), conjugate(a, result.planted), tol=1e-7)


def test_tower_alternative_is_isomorphic_but_different():
    scenario = registry.get("M2-in-M4-tower")()
    assert scenario.alternatives[0].dim == scenario.a.dim
    assert not same_span(scenario.alternatives[0], scenario.a)


def test_toolkit_rejects_bad_sample_count():
    with pytest.raises(ValueError):
        Toolkit(samples=0)
