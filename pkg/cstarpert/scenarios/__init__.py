"""Catalog of finite-dimensional inclusions."""

from functools import partial

from cstarpert.scenarios.base import Scenario, ScenarioRegistry
from cstarpert.scenarios.diagonal import diagonal_in_full
from cstarpert.scenarios.pauli import PAULI_GROUP, pauli_fixed_points
from cstarpert.scenarios.scalars import scalars_in_full
from cstarpert.scenarios.tensor import left_factor_in_full
from cstarpert.scenarios.towers import block_tower, masa_tower, tensor_tower

# Register all scenarios
registry = ScenarioRegistry()
for _n in (2, 3, 4):
    registry.register(f"scalars-in-M{_n}", partial(scalars_in_full, _n))
    registry.register(f"diag-in-M{_n}", partial(diagonal_in_full, _n))
for _k in (2, 3):
    for _m in (2, 3):
        registry.register(f"M{_k}-in-M{_k * _m}", partial(left_factor_in_full, _k, _m))
registry.register("pauli-fixed-in-M2", pauli_fixed_points)
for _k, _m in ((2, 2), (2, 3), (3, 2)):
    registry.register(f"M{_k}-in-M{_k * _m}-tower", partial(tensor_tower, _k, _m))
registry.register("diag-tower-M2", masa_tower)
registry.register("diag-tower-M4", block_tower)


def catalog():
    """Build every registered scenario, in name order."""
    return [registry.get(name)() for name in registry.list_names()]


__all__ = [
    "Scenario",
    "ScenarioRegistry",
    "PAULI_GROUP",
    "catalog",
    "registry",
]
