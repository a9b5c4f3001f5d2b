"""Scenario record and registry."""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

from cstarpert.core.algebra import Subalgebra, span_residual
from cstarpert.core.expectation import CondExpectation, trace_preserving_expectation
from cstarpert.utils.config import DEFAULT_TOLERANCES
from cstarpert.utils.exceptions import NotNested, PreconditionFailed


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    An inclusion C <= A <= D of unital subalgebras of M_n.

    Two-level inclusions use A = D. `alternatives` lists further intermediate
    algebras used by clustering; `expected` records known values such as the
    scalar the index equals.
    """

    name: str
    c: Subalgebra
    a: Subalgebra
    d: Subalgebra
    description: str
    expected: Optional[dict] = None
    expectation_builder: Optional[Callable[[Subalgebra, Subalgebra], CondExpectation]] = None
    alternatives: Tuple[Subalgebra, ...] = field(default_factory=tuple)

    @property
    def ambient_dim(self) -> int:
        return self.d.ambient_dim

    def base_expectation(self) -> CondExpectation:
        """E_C^D: the scenario's own builder, or the trace-preserving one."""
        if self.expectation_builder is not None:
            return self.expectation_builder(self.d, self.c)
        return trace_preserving_expectation(self.d, self.c)

    def check(self, tol: Optional[float] = None) -> None:
        """
        Validate nesting and closure of C, A and D.

        Raises:
            NotNested: If C <= A <= D fails
            PreconditionFailed: If one of the algebras is not closed or not unital
        """
        tol = DEFAULT_TOLERANCES.closure if tol is None else tol
        for inner, outer in ((self.c, self.a), (self.a, self.d)) + tuple(
            (self.c, alt) for alt in self.alternatives
        ):
            residual = span_residual(inner, outer)
            if residual > tol:
                raise NotNested(residual)
        for label, alg in (("c", self.c), ("a", self.a), ("d", self.d)):
            worst = max(alg.closure_residuals().values())
            if worst > tol:
                raise PreconditionFailed(f"{self.name}.{label} is not a unital *-subalgebra ({worst:.3e})")


ScenarioBuilder = Callable[[], Scenario]


class ScenarioRegistry:
    """Registry for scenario builders."""

    def __init__(self):
        """Initialize the registry."""
        self._builders: Dict[str, ScenarioBuilder] = {}

    def register(self, name: str, builder: ScenarioBuilder):
        """
        Register a builder under a scenario name.

        Args:
            name: Scenario name (e.g., 'M2-in-M4')
            builder: Zero-argument callable returning the Scenario
        """
        self._builders[name] = builder

    def get(self, name: str) -> Optional[ScenarioBuilder]:
        """
        Get the builder for a scenario.

        Args:
            name: Scenario name

        Returns:
            Builder or None if not found
        """
        return self._builders.get(name)

    def list_names(self) -> List[str]:
        """List all registered scenario names."""
        return sorted(self._builders.keys())

    def has_name(self, name: str) -> bool:
        """Check if a scenario is registered."""
        return name in self._builders
