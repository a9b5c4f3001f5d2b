"""Main toolkit class."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from cstarpert.core.algebra import Subalgebra, conjugate, relative_commutant
from cstarpert.core.audit import AuditResult, run_audit
from cstarpert.core.basic_construction import ModuleOperator, jones_projection, localize
from cstarpert.core.expectation import CondExpectation, QuasiBasis, quasi_basis, unit_ball_rescale
from cstarpert.core.matrices import random_unitary_near_identity
from cstarpert.core.perturbation import (
    ClusterReport,
    DistanceEstimate,
    PerturbationReport,
    cluster_intermediates,
    compatible_expectation,
    distance_estimate,
    perturb,
)
from cstarpert.scenarios import Scenario, registry
from cstarpert.utils.config import DEFAULT_TOLERANCES, Tolerances
from cstarpert.utils.exceptions import UnknownScenarioError
from cstarpert.utils.validation import validate_eps, validate_positive

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class RecoverResult:
    """A planted unitary u0 with B = u0 A u0* and the pipeline's answer."""

    scenario: Scenario
    eps: float
    seed: int
    planted: np.ndarray
    report: PerturbationReport


class Toolkit:
    """Main entry point: runs the inclusion operations on catalog scenarios."""

    def __init__(self, tolerances: Optional[Tolerances] = None, samples: int = 100):
        """
        Initialize the toolkit.

        Args:
            tolerances: Thresholds for every check (defaults to DEFAULT_TOLERANCES)
            samples: Number of sampled unit-ball elements in bound audits
        """
        self.tolerances = tolerances or DEFAULT_TOLERANCES
        self.samples = validate_positive("samples", samples)
        self.registry = registry

    def list_scenarios(self) -> List[str]:
        """List all catalog scenario names."""
        return self.registry.list_names()

    def scenario(self, name: str) -> Scenario:
        """
        Build a catalog scenario.

        Raises:
            UnknownScenarioError: If the name is not registered
        """
        if not self.registry.has_name(name):
            raise UnknownScenarioError(name, self.registry.list_names())
        scenario = self.registry.get(name)()
        scenario.check(self.tolerances.closure)
        return scenario

    def expectation(self, name: str) -> CondExpectation:
        """The scenario's E_C^D."""
        return self.scenario(name).base_expectation()

    def _quasi_basis(self, e_cd: CondExpectation) -> QuasiBasis:
        return quasi_basis(e_cd, floor=self.tolerances.frame_floor, tolerance=self.tolerances.reconstruction)

    def quasi_basis(self, name: str, unit_ball: bool = False) -> QuasiBasis:
        """Quasi-basis of the scenario's E_C^D, optionally rescaled into the unit ball."""
        qb = self._quasi_basis(self.expectation(name))
        return unit_ball_rescale(qb) if unit_ball else qb

    def index(self, name: str) -> np.ndarray:
        """Watatani index of the scenario's E_C^D."""
        return self.quasi_basis(name).index_element

    def inclusion_index(self, c: Subalgebra, d: Subalgebra) -> np.ndarray:
        """
        Watatani index of the trace-preserving expectation for a caller-supplied C <= D.

        Raises:
            NotNested: If C is not contained in D
            PreconditionFailed: If C or D is not a unital *-subalgebra
        """
        inclusion = Scenario(name="custom", c=c, a=d, d=d, description="Caller-supplied inclusion")
        inclusion.check(self.tolerances.closure)
        return self._quasi_basis(inclusion.base_expectation()).index_element

    def jones_projections(self, name: str) -> Tuple[ModuleOperator, ModuleOperator]:
        """e_C and e_A on the module localized at E_C^D, with E_A^D the compatible expectation."""
        scenario = self.scenario(name)
        e_cd = scenario.base_expectation()
        mod = localize(e_cd, floor=self.tolerances.faithful_floor)
        e_ad = compatible_expectation(e_cd, scenario.a, None, self.tolerances)
        return (
            jones_projection(mod, e_cd, self.tolerances.compatibility),
            jones_projection(mod, e_ad, self.tolerances.compatibility),
        )

    def plant(self, scenario: Scenario, eps: float, seed: int) -> np.ndarray:
        """Seeded unitary in C' n D at distance eps from I."""
        eps = validate_eps(eps)
        commutant = relative_commutant(scenario.c, scenario.d)
        return random_unitary_near_identity(scenario.ambient_dim, eps, seed, commutant.basis)

    def recover(self, name: str, eps: float, seed: int) -> RecoverResult:
        """
        Plant B = u0 A u0* and run the perturbation pipeline on (A, B).

        Raises:
            UnknownScenarioError: If the name is not registered
            EpsOutOfRange: If eps is outside [0, 2)
            TooFar: If the pipeline cannot bridge the distance
        """
        scenario = self.scenario(name)
        planted = self.plant(scenario, eps, seed)
        b = conjugate(scenario.a, planted)
        logger.info("recover %s eps=%g seed=%d", name, eps, seed)
        report = perturb(
            scenario.c,
            scenario.d,
            scenario.base_expectation(),
            scenario.a,
            b,
            samples=self.samples,
            seed=seed,
            tolerances=self.tolerances,
        )
        return RecoverResult(scenario=scenario, eps=eps, seed=seed, planted=planted, report=report)

    def distance(self, name: str, eps: float, seed: int) -> DistanceEstimate:
        """Certified distance bracket between A and a planted u0 A u0*, with u0 as witness."""
        scenario = self.scenario(name)
        e_cd = scenario.base_expectation()
        planted = self.plant(scenario, eps, seed)
        b = conjugate(scenario.a, planted)
        e_a = compatible_expectation(e_cd, scenario.a, None, self.tolerances)
        e_b = compatible_expectation(e_cd, b, None, self.tolerances)
        return distance_estimate(
            scenario.a,
            b,
            localize(e_cd),
            e_a,
            e_b,
            self.samples,
            seed,
            witness=planted,
            tol=self.tolerances.conjugation,
        )

    def cluster(
        self,
        name: str,
        eps: float,
        seed: int,
        attempt_below: float = 1.0,
    ) -> ClusterReport:
        """
        Cluster A, a planted u0 A u0* and the scenario's alternative intermediates.

        Entry order is [A, u0 A u0*, *alternatives].
        """
        scenario = self.scenario(name)
        e_cd = scenario.base_expectation()
        algebras = [scenario.a, conjugate(scenario.a, self.plant(scenario, eps, seed))]
        algebras.extend(scenario.alternatives)
        entries = [(alg, compatible_expectation(e_cd, alg, None, self.tolerances)) for alg in algebras]
        return cluster_intermediates(
            entries,
            localize(e_cd),
            attempt_below=attempt_below,
            samples=self.samples,
            seed=seed,
            tolerances=self.tolerances,
        )

    def audit(self, trials: int, seed: int) -> List[AuditResult]:
        """Randomized sweeps of the standalone estimates."""
        return run_audit(validate_positive("trials", trials), seed)
