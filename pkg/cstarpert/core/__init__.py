"""Core numerical engine."""

from cstarpert.core.algebra import Subalgebra
from cstarpert.core.expectation import CondExpectation, QuasiBasis
from cstarpert.core.perturbation import PerturbationReport, perturb
from cstarpert.core.toolkit import Toolkit

__all__ = [
    "CondExpectation",
    "PerturbationReport",
    "QuasiBasis",
    "Subalgebra",
    "Toolkit",
    "perturb",
]
