"""The C*-basic construction of a finite inclusion, localized at a faithful trace."""

import hashlib
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cstarpert.core.algebra import Subalgebra, generate, orthonormalize
from cstarpert.core.expectation import CondExpectation, QuasiBasis, compatibility_residual
from cstarpert.core.matrices import dagger, identity, op_norm
from cstarpert.utils.config import DEFAULT_TOLERANCES
from cstarpert.utils.exceptions import (
    CompatibilityRequired,
    DegenerateForm,
    IllDefined,
    NotInAlgebra,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LocalizedModule:
    """
    The Hilbert module of D over C, localized at tau o E_C^D.

    Vectors are written in coordinates of `onb`, a basis of D orthonormal for
    <x, y> = tr(E_C^D(x* y)); `to_ambient` maps those coordinates to the HS
    coordinates of D and `from_ambient` is its inverse.
    """

    ambient: Subalgebra
    base_expectation: CondExpectation
    gram: np.ndarray
    onb: np.ndarray
    to_ambient: np.ndarray
    from_ambient: np.ndarray

    @property
    def dim(self) -> int:
        return self.ambient.dim

    def vector(self, x: np.ndarray) -> np.ndarray:
        """eta(x) in onb coordinates."""
        return self.from_ambient @ self.ambient.coordinates(x)

    def readback(self, v: np.ndarray) -> np.ndarray:
        """The element x of D with eta(x) = v."""
        return self.ambient.element(self.to_ambient @ v)

    def operator_from_ambient(self, matrix: np.ndarray) -> np.ndarray:
        """Convert an operator given on HS coordinates of D to onb coordinates."""
        return self.from_ambient @ matrix @ self.to_ambient

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.ambient.basis).tobytes())
        digest.update(np.ascontiguousarray(np.round(self.gram, 12)).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True, eq=False)
class ModuleOperator:
    """An adjointable operator on a LocalizedModule, in onb coordinates."""

    module: LocalizedModule
    matrix: np.ndarray

    def adjoint(self) -> "ModuleOperator":
        return ModuleOperator(self.module, dagger(self.matrix))

    def norm(self) -> float:
        return op_norm(self.matrix)

    def __matmul__(self, other: "ModuleOperator") -> "ModuleOperator":
        return ModuleOperator(self.module, self.matrix @ other.matrix)

    def __sub__(self, other: "ModuleOperator") -> "ModuleOperator":
        return ModuleOperator(self.module, self.matrix - other.matrix)


def localize(e_cd: CondExpectation, floor: Optional[float] = None) -> LocalizedModule:
    """
    Localize the Hilbert C-module completion of D at the normalized trace.

    Raises:
        DegenerateForm: If tr(E_C^D(x* y)) is not positive definite
    """
    floor = DEFAULT_TOLERANCES.faithful_floor if floor is None else floor
    gram = e_cd.gram()
    gram = (gram + dagger(gram)) / 2
    vals, vecs = np.linalg.eigh(gram)
    if vals[0] <= floor:
        raise DegenerateForm(float(vals[0]))
    to_ambient = vecs / np.sqrt(vals)
    from_ambient = np.sqrt(vals)[:, None] * dagger(vecs)
    onb = np.tensordot(to_ambient.T, e_cd.source.basis, axes=1)
    return LocalizedModule(
        ambient=e_cd.source,
        base_expectation=e_cd,
        gram=gram,
        onb=onb,
        to_ambient=to_ambient,
        from_ambient=from_ambient,
    )


def _left_multiplication(mod: LocalizedModule, d: np.ndarray) -> np.ndarray:
    basis = mod.ambient.basis
    products = np.einsum("ij,kjl->kil", d, basis)
    return mod.operator_from_ambient(mod.ambient.coordinates_many(products))


def lambda_op(mod: LocalizedModule, d: np.ndarray, tol: Optional[float] = None) -> ModuleOperator:
    """
    Left multiplication lambda(d): eta(x) -> eta(dx).

    Raises:
        NotInAlgebra: If d is not in D
    """
    tol = DEFAULT_TOLERANCES.closure if tol is None else tol
    residual = mod.ambient.residual(d)
    if residual > tol:
        raise NotInAlgebra(residual)
    return ModuleOperator(mod, _left_multiplication(mod, d))


def jones_projection(
    mod: LocalizedModule,
    e_ad: CondExpectation,
    tol: Optional[float] = None,
) -> ModuleOperator:
    """
    The Jones projection e_A: eta(x) -> eta(E_A^D(x)).

    Only compatible expectations give gram-orthogonal projections, so others
    are rejected.

    Raises:
        CompatibilityRequired: If E_C^A o E_A^D != E_C^D within tol
    """
    tol = DEFAULT_TOLERANCES.compatibility if tol is None else tol
    residual = compatibility_residual(mod.base_expectation, e_ad)
    if residual > tol:
        raise CompatibilityRequired(residual)
    images = e_ad.apply_many(mod.ambient.basis)
    matrix = mod.operator_from_ambient(mod.ambient.coordinates_many(images))
    return ModuleOperator(mod, matrix)


def covariant_residual(mod: LocalizedModule, e_c: ModuleOperator) -> float:
    """Largest ||e_C lambda(b) e_C - lambda(E_C^D(b)) e_C|| over the basis of D."""
    worst = 0.0
    for b in mod.ambient.basis:
        lhs = e_c.matrix @ _left_multiplication(mod, b) @ e_c.matrix
        rhs = _left_multiplication(mod, mod.base_expectation.apply(b)) @ e_c.matrix
        worst = max(worst, op_norm(lhs - rhs))
    return worst


def isometry_defect(mod: LocalizedModule, samples: int, seed: int) -> float:
    """Largest | ||lambda(d)|| - ||d|| | over seeded random d in D."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        d = mod.ambient.sample(rng) * rng.uniform(0.5, 2.0)
        worst = max(worst, abs(op_norm(_left_multiplication(mod, d)) - op_norm(d)))
    return worst


def basic_construction_algebra(mod: LocalizedModule) -> Subalgebra:
    """C*<D, e_C>: generated by lambda(x_i) e_C lambda(x_j) over a basis of D."""
    e_c = jones_projection(mod, mod.base_expectation).matrix
    lambdas = [_left_multiplication(mod, x) for x in mod.ambient.basis]
    spanning = [li @ e_c @ lj for li in lambdas for lj in lambdas]
    algebra = generate(mod.dim, spanning)
    logger.debug("basic construction of a %d-dim module has dim %d", mod.dim, algebra.dim)
    return algebra


def lambda_image(mod: LocalizedModule) -> Subalgebra:
    """lambda(D) as a subalgebra of the operators on the module."""
    lambdas = [_left_multiplication(mod, x) for x in mod.ambient.basis]
    return Subalgebra(ambient_dim=mod.dim, basis=orthonormalize(lambdas))


def dual_expectation(
    mod: LocalizedModule,
    qb: QuasiBasis,
    algebra: Optional[Subalgebra] = None,
    tol: Optional[float] = None,
) -> CondExpectation:
    """
    The dual expectation E_D: C*<D, e_C> -> lambda(D).

    Prescribed on the spanning set by E_D(lambda(x) e_C lambda(y)) =
    lambda((Index E_C^D)^-1 xy) and extended by a least-squares solve, whose
    residual certifies that the prescription is consistent.

    Raises:
        IllDefined: If the least-squares residual exceeds tol
    """
    tol = DEFAULT_TOLERANCES.ill_defined if tol is None else tol
    algebra = basic_construction_algebra(mod) if algebra is None else algebra
    m = mod.dim
    h_inv = np.linalg.inv(qb.index_element)
    e_c = jones_projection(mod, mod.base_expectation).matrix
    basis = mod.ambient.basis
    lambdas = [_left_multiplication(mod, x) for x in basis]

    spanning = np.array([li @ e_c @ lj for li in lambdas for lj in lambdas])
    targets = np.array(
        [_left_multiplication(mod, h_inv @ xi @ xj) for xi in basis for xj in basis]
    )
    coords = algebra.coordinates_many(spanning)
    flat_targets = targets.reshape(len(targets), -1)
    solution, *_ = np.linalg.lstsq(coords.T, flat_targets, rcond=None)
    residual = float(np.max(np.linalg.norm(coords.T @ solution - flat_targets, axis=1)))
    if residual > tol:
        raise IllDefined(residual)

    images = solution.reshape(algebra.dim, m, m)
    return CondExpectation(
        source=algebra,
        target=lambda_image(mod),
        matrix=algebra.coordinates_many(images),
    )


def multiplicativity_identity(
    mod: LocalizedModule,
    e_bd: CondExpectation,
    e_b: ModuleOperator,
    samples: int,
    seed: int,
) -> float:
    """
    Largest gap between ||E_B(xy) - E_B(x)E_B(y)|| and ||e_B lambda(x)(I - e_B) lambda(y) e_B||.
    """
    rng = np.random.default_rng(seed)
    one = identity(mod.dim)
    worst = 0.0
    for _ in range(samples):
        x = mod.ambient.sample(rng)
        y = mod.ambient.sample(rng)
        defect = e_bd.apply(x @ y) - e_bd.apply(x) @ e_bd.apply(y)
        sandwich = (
            e_b.matrix
            @ _left_multiplication(mod, x)
            @ (one - e_b.matrix)
            @ _left_multiplication(mod, y)
            @ e_b.matrix
        )
        worst = max(worst, abs(op_norm(defect) - op_norm(sandwich)))
    return worst
