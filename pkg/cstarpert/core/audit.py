"""Seeded randomized sweeps of the standalone norm estimates."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from cstarpert.core.algebra import conjugate, full_matrix_algebra, relative_commutant
from cstarpert.core.basic_construction import localize
from cstarpert.core.expectation import (
    normalized_trace,
    quasi_basis,
    trace_preserving_expectation,
)
from cstarpert.core.matrices import (
    commutator_norm,
    dagger,
    identity,
    op_norm,
    polar_unitary,
    projection_intertwiner,
    random_element,
    random_hermitian,
    random_unitary_near_identity,
    spectral_window_projection,
)
from cstarpert.core.perturbation import (
    distance_estimate,
    expectation_vs_inclusion,
    homomorphism_from_images,
    jones_distance_bound,
    multiplicativity_defect,
)
from cstarpert.scenarios import registry

logger = logging.getLogger(__name__)

# (lhs - rhs, identity residual) for one trial
Trial = Tuple[float, float]


@dataclass(frozen=True)
class AuditResult:
    """Worst outcome of one estimate over all trials."""

    name: str
    trials: int
    max_violation: float
    max_residual: float

    def passed(self, limit: float = 1e-7) -> bool:
        return self.max_violation <= limit and self.max_residual <= limit

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "max_violation": self.max_violation,
            "max_residual": self.max_residual,
        }


def _random_projection(dim: int, rng: np.random.Generator) -> np.ndarray:
    rank = int(rng.integers(1, dim))
    q, _ = np.linalg.qr(random_element(dim, rng))
    kept = q[:, :rank]
    return kept @ dagger(kept)


def _polar_trial(rng: np.random.Generator) -> Trial:
    dim = int(rng.integers(2, 5))
    z = random_element(dim, rng)
    x = identity(dim) + rng.uniform(0.01, 0.95) * z / op_norm(z)
    u = polar_unitary(x)
    unitary = op_norm(dagger(u) @ u - identity(dim))
    return op_norm(u - identity(dim)) - math.sqrt(2) * op_norm(x - identity(dim)), unitary


def _window_trial(rng: np.random.Generator) -> Trial:
    dim = int(rng.integers(2, 6))
    p = _random_projection(dim, rng)
    a = p + rng.uniform(0.01, 0.45) * random_hermitian(dim, rng)
    delta = op_norm(a - p)
    q = spectral_window_projection(a, 1 - delta, 1 + delta)
    residual = max(op_norm(q @ q - q), commutator_norm(q, a))
    return op_norm(q - p) - 2 * delta, residual


def _intertwiner_trial(rng: np.random.Generator) -> Trial:
    dim = int(rng.integers(2, 6))
    p = _random_projection(dim, rng)
    u = random_unitary_near_identity(dim, rng.uniform(0.01, 0.45), int(rng.integers(2**31)))
    q = u @ p @ dagger(u)
    w = projection_intertwiner(p, q)
    residual = max(
        op_norm(w @ p @ dagger(w) - q),
        op_norm(dagger(w) @ w - identity(dim)),
    )
    return op_norm(w - identity(dim)) - math.sqrt(2) * op_norm(p - q), residual


def _multiplicativity_trial(rng: np.random.Generator) -> Trial:
    dim = int(rng.integers(2, 4))
    a = full_matrix_algebra(dim)
    v = random_unitary_near_identity(dim, rng.uniform(0.01, 1.5), int(rng.integers(2**31)))
    images = np.einsum("ij,kjl,lm->kim", v, a.basis, dagger(v))
    psi = homomorphism_from_images(a, a, images, None)
    mix = rng.uniform(0.0, 0.5)

    def phi(x):
        return (1 - mix) * v @ x @ dagger(v) + mix * normalized_trace(x) * identity(dim)

    check = multiplicativity_defect(phi, psi, samples=8, seed=int(rng.integers(2**31)))
    return check.lhs - check.rhs, psi.mult_residual


class _TowerPairs:
    """Random pairs A, B = uAu* inside the scalars <= M_2 (x) I <= M_4 tower."""

    def __init__(self):
        scenario = registry.get("M2-in-M4-tower")()
        self.scenario = scenario
        self.e_cd = scenario.base_expectation()
        self.mod = localize(self.e_cd)
        self.index_norm = op_norm(quasi_basis(self.e_cd).index_element)
        self.commutant = relative_commutant(scenario.c, scenario.d)
        self.e_a = trace_preserving_expectation(scenario.d, scenario.a)

    def draw(self, rng: np.random.Generator):
        s = self.scenario
        eps = float(10 ** rng.uniform(-4, -0.5))
        u = random_unitary_near_identity(s.ambient_dim, eps, int(rng.integers(2**31)), self.commutant.basis)
        b = conjugate(s.a, u)
        return b, trace_preserving_expectation(s.d, b)


def _expectation_trial(pairs: _TowerPairs, rng: np.random.Generator) -> Trial:
    b, e_b = pairs.draw(rng)
    seed = int(rng.integers(2**31))
    estimate = distance_estimate(pairs.scenario.a, b, pairs.mod, pairs.e_a, e_b, 8, seed, pairs.index_norm)
    checks = expectation_vs_inclusion(e_b, pairs.scenario.a, estimate.upper, 8, seed)
    return max(c.lhs - c.rhs for c in checks), max(0.0, estimate.lower - estimate.upper)


def _jones_trial(pairs: _TowerPairs, rng: np.random.Generator) -> Trial:
    b, e_b = pairs.draw(rng)
    seed = int(rng.integers(2**31))
    estimate = distance_estimate(pairs.scenario.a, b, pairs.mod, pairs.e_a, e_b, 0, seed, pairs.index_norm)
    check = jones_distance_bound(
        pairs.scenario.a, e_b, estimate.method_notes["jones_gap"], pairs.index_norm, 8, seed
    )
    return check.lhs - check.rhs, 0.0


def _sweep(name: str, trials: int, trial: Callable[[], Trial]) -> AuditResult:
    violation = -math.inf
    residual = 0.0
    for _ in range(trials):
        v, r = trial()
        violation = max(violation, v)
        residual = max(residual, r)
    logger.debug("audit %s: max violation %.3e, max residual %.3e", name, violation, residual)
    return AuditResult(name=name, trials=trials, max_violation=violation, max_residual=residual)


def run_audit(trials: int, seed: int) -> List[AuditResult]:
    """
    Run every estimate `trials` times.

    Each sweep draws from its own child of SeedSequence(seed).

    Raises:
        ValueError: If trials < 1
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    children = np.random.SeedSequence(seed).spawn(6)
    rngs = [np.random.default_rng(child) for child in children]
    pairs = _TowerPairs()
    sweeps: Dict[str, Callable[[], Trial]] = {
        "polar_unitary": lambda: _polar_trial(rngs[0]),
        "spectral_window": lambda: _window_trial(rngs[1]),
        "projection_intertwiner": lambda: _intertwiner_trial(rngs[2]),
        "multiplicativity_defect": lambda: _multiplicativity_trial(rngs[3]),
        "expectation_vs_inclusion": lambda: _expectation_trial(pairs, rngs[4]),
        "jones_distance": lambda: _jones_trial(pairs, rngs[5]),
    }
    return [_sweep(name, trials, trial) for name, trial in sweeps.items()]
