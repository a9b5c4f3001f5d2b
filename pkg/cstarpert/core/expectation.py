"""Conditional expectations of finite index, quasi-bases and the Watatani index."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from cstarpert.core.algebra import Subalgebra, orthonormalize, span_residual
from cstarpert.core.matrices import (
    as_cmatrix,
    dagger,
    identity,
    is_unitary,
    min_eigenvalue,
    op_norm,
    random_element,
)
from cstarpert.utils.config import DEFAULT_TOLERANCES, Tolerances
from cstarpert.utils.exceptions import (
    CompatibilityResidualExceeded,
    DimensionMismatch,
    NotIntermediate,
    NotNested,
    PreconditionFailed,
    ReconstructionFailed,
    SingularFrame,
)

logger = logging.getLogger(__name__)


def normalized_trace(x: np.ndarray) -> complex:
    return complex(np.trace(x)) / x.shape[0]


@dataclass(frozen=True, eq=False)
class CondExpectation:
    """
    A conditional expectation E of `source` onto `target`.

    `matrix` acts on HS coordinates of the source basis: the coordinates of
    E(x) are matrix @ coordinates(x).
    """

    source: Subalgebra
    target: Subalgebra
    matrix: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.source.ambient_dim

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.source.element(self.matrix @ self.source.coordinates(x))

    def apply_many(self, stack: np.ndarray) -> np.ndarray:
        """Apply E to a stack of shape (N, n, n)."""
        coords = self.matrix @ self.source.coordinates_many(stack)
        return np.tensordot(coords.T, self.source.basis, axes=1)

    def gram(self) -> np.ndarray:
        """The form (x, y) -> tr(E(x* y)) on the source basis."""
        basis = self.source.basis
        products = np.einsum("iba,jbc->ijac", np.conj(basis), basis)
        k, n = basis.shape[0], self.ambient_dim
        images = self.apply_many(products.reshape(k * k, n, n))
        traces = np.trace(images, axis1=1, axis2=2) / n
        return traces.reshape(k, k)


@dataclass(frozen=True)
class ExpectationAudit:
    """Residuals of the defining properties of a conditional expectation."""

    idempotent: float
    unital: float
    bimodule: float
    positivity: float
    faithful: float

    def passed(self, tolerances: Tolerances = DEFAULT_TOLERANCES) -> bool:
        return (
            self.idempotent <= tolerances.closure
            and self.unital <= tolerances.closure
            and self.bimodule <= tolerances.closure
            and self.positivity >= -tolerances.positivity
            and self.faithful >= tolerances.faithful_floor
        )


def from_linear_map(
    source: Subalgebra,
    target: Subalgebra,
    fn: Callable[[np.ndarray], np.ndarray],
) -> CondExpectation:
    """Tabulate a linear map on the source basis as a CondExpectation."""
    images = np.array([fn(b) for b in source.basis])
    return CondExpectation(source=source, target=target, matrix=source.coordinates_many(images))


def verify(e: CondExpectation, samples: int = 200, seed: int = 0) -> ExpectationAudit:
    """
    Measure the five conditional-expectation properties of e.

    Bimodularity is checked as E(ax) = aE(x) and E(xa) = E(x)a on basis
    elements, which together give E(axb) = aE(x)b by linearity.
    """
    src, tgt = e.source, e.target
    n = e.ambient_dim
    images = e.apply_many(src.basis)
    idempotent = 0.0
    for image in images:
        idempotent = max(idempotent, tgt.residual(image))
    fixed = e.apply_many(tgt.basis) - tgt.basis
    idempotent = max(idempotent, float(np.max(np.linalg.norm(fixed, ord=2, axis=(1, 2)))))

    unital = op_norm(e.apply(identity(n)) - identity(n))

    left = np.einsum("aij,xjk->axik", tgt.basis, src.basis).reshape(-1, n, n)
    right = np.einsum("xij,ajk->axik", src.basis, tgt.basis).reshape(-1, n, n)
    left_expected = np.einsum("aij,xjk->axik", tgt.basis, images).reshape(-1, n, n)
    right_expected = np.einsum("xij,ajk->axik", images, tgt.basis).reshape(-1, n, n)
    bimodule = max(
        float(np.max(np.linalg.norm(e.apply_many(left) - left_expected, ord=2, axis=(1, 2)))),
        float(np.max(np.linalg.norm(e.apply_many(right) - right_expected, ord=2, axis=(1, 2)))),
    )

    rng = np.random.default_rng(seed)
    positivity = math.inf
    for _ in range(samples):
        x = random_element(n, rng, src.basis)
        positivity = min(positivity, min_eigenvalue(e.apply(dagger(x) @ x)))

    gram = e.gram()
    faithful = float(np.linalg.eigvalsh((gram + dagger(gram)) / 2)[0])
    return ExpectationAudit(
        idempotent=idempotent,
        unital=unital,
        bimodule=bimodule,
        positivity=positivity,
        faithful=faithful,
    )


def _check_nested(inner: Subalgebra, outer: Subalgebra, tol: float) -> None:
    if inner.ambient_dim != outer.ambient_dim:
        raise DimensionMismatch(outer.ambient_dim, inner.ambient_dim)
    residual = span_residual(inner, outer)
    if residual > tol:
        raise NotNested(residual)


def _check_intermediate(e: CondExpectation, a: Subalgebra, tol: float) -> None:
    if a.ambient_dim != e.ambient_dim:
        raise DimensionMismatch(e.ambient_dim, a.ambient_dim)
    residual = max(span_residual(e.target, a), span_residual(a, e.source))
    if residual > tol:
        raise NotIntermediate(residual)


def trace_preserving_expectation(d: Subalgebra, a: Subalgebra) -> CondExpectation:
    """
    The HS-orthogonal projection of D onto A.

    It preserves the normalized trace of M_n and is the trace-preserving
    conditional expectation of D onto A.

    Raises:
        NotNested: If A is not contained in D
    """
    _check_nested(a, d, DEFAULT_TOLERANCES.closure)
    cross = np.conj(d.flat_basis) @ a.flat_basis.T
    return CondExpectation(source=d, target=a, matrix=cross @ dagger(cross))


def group_average_expectation(d: Subalgebra, group: Sequence[np.ndarray]) -> CondExpectation:
    """
    Average over a finite unitary group acting by conjugation: x -> |G|^-1 sum g x g*.

    The target is the fixed-point algebra of D, obtained as the image of the map.
    """
    group = np.array([as_cmatrix(g) for g in group])
    for g in group:
        if not is_unitary(g, DEFAULT_TOLERANCES.closure):
            raise PreconditionFailed("group elements must be unitary")

    def average(x: np.ndarray) -> np.ndarray:
        return np.einsum("gij,jk,glk->il", group, x, np.conj(group)) / len(group)

    images = np.array([average(b) for b in d.basis])
    target = Subalgebra(ambient_dim=d.ambient_dim, basis=orthonormalize(images))
    return CondExpectation(source=d, target=target, matrix=d.coordinates_many(images))


def restrict(e: CondExpectation, a: Subalgebra) -> CondExpectation:
    """E restricted to an intermediate algebra A, as a conditional expectation A -> target."""
    _check_intermediate(e, a, DEFAULT_TOLERANCES.closure)
    images = e.apply_many(a.basis)
    return CondExpectation(source=a, target=e.target, matrix=a.coordinates_many(images))


@dataclass(frozen=True, eq=False)
class QuasiBasis:
    """A finite family {u_i} with b = sum u_i E(u_i* b) for every b in the source."""

    elements: np.ndarray
    for_expectation: CondExpectation
    index_element: np.ndarray
    in_unit_ball: bool

    @classmethod
    def from_elements(cls, elements: Sequence[np.ndarray], e: CondExpectation) -> "QuasiBasis":
        elements = np.array([as_cmatrix(u) for u in elements])
        index = np.einsum("kij,klj->il", elements, np.conj(elements))
        max_norm = max(op_norm(u) for u in elements)
        return cls(
            elements=elements,
            for_expectation=e,
            index_element=index,
            in_unit_ball=max_norm <= 1 + 1e-9,
        )

    @property
    def size(self) -> int:
        return int(self.elements.shape[0])

    def reconstruct(self, b: np.ndarray) -> np.ndarray:
        e = self.for_expectation
        inner = e.apply_many(np.einsum("kji,jl->kil", np.conj(self.elements), b))
        return np.einsum("kij,kjl->il", self.elements, inner)

    def reconstruction_residual(self) -> float:
        """Largest ||sum u_i E(u_i* b) - b|| over the source basis."""
        return max(
            op_norm(self.reconstruct(b) - b) for b in self.for_expectation.source.basis
        )


def quasi_basis(
    e: CondExpectation,
    start_basis: Optional[np.ndarray] = None,
    floor: Optional[float] = None,
    tolerance: Optional[float] = None,
) -> QuasiBasis:
    """
    Quasi-basis of a faithful conditional expectation by the module-frame method.

    With {m_k} an HS-orthonormal basis of the source, the frame operator
    S(b) = sum m_k E(m_k* b) is positive and invertible for the inner product
    <x, y> = tr(E(x* y)); u_k = S^{-1/2}(m_k) is then a quasi-basis.

    Args:
        e: A faithful conditional expectation
        start_basis: Optional alternative HS-orthonormal basis {m_k} of the source
        floor: Eigenvalue floor below which the frame counts as singular
        tolerance: Largest admissible reconstruction residual

    Returns:
        The QuasiBasis

    Raises:
        SingularFrame: If the inner product or S is not positive definite
        ReconstructionFailed: If sum u_i E(u_i* b) misses b by more than tolerance
    """
    floor = DEFAULT_TOLERANCES.frame_floor if floor is None else floor
    tolerance = DEFAULT_TOLERANCES.reconstruction if tolerance is None else tolerance
    src = e.source
    n = e.ambient_dim
    if e.target.dim == src.dim:
        return QuasiBasis.from_elements([identity(n)], e)

    frame = src.basis if start_basis is None else np.asarray(start_basis, dtype=np.complex128)
    k = src.dim
    products = np.einsum("mba,jbc->mjac", np.conj(frame), src.basis).reshape(-1, n, n)
    inner = e.apply_many(products).reshape(frame.shape[0], k, n, n)
    images = np.einsum("mab,mjbc->jac", frame, inner)
    s_mat = src.coordinates_many(images)

    gram = e.gram()
    gram = (gram + dagger(gram)) / 2
    g_vals, g_vecs = np.linalg.eigh(gram)
    if g_vals[0] <= floor:
        raise SingularFrame(float(g_vals[0]))
    g_half = (g_vecs * np.sqrt(g_vals)) @ dagger(g_vecs)
    g_half_inv = (g_vecs / np.sqrt(g_vals)) @ dagger(g_vecs)

    s_sym = g_half @ s_mat @ g_half_inv
    s_sym = (s_sym + dagger(s_sym)) / 2
    s_vals, s_vecs = np.linalg.eigh(s_sym)
    logger.debug("frame operator spectrum [%.3e, %.3e]", s_vals[0], s_vals[-1])
    if s_vals[0] <= floor:
        raise SingularFrame(float(s_vals[0]))
    s_inv_half = g_half_inv @ ((s_vecs / np.sqrt(s_vals)) @ dagger(s_vecs)) @ g_half

    coords = s_inv_half @ src.coordinates_many(frame)
    elements = np.tensordot(coords.T, src.basis, axes=1)
    qb = QuasiBasis.from_elements(elements, e)
    residual = qb.reconstruction_residual()
    if residual > tolerance:
        raise ReconstructionFailed(residual)
    return qb


def unit_ball_rescale(qb: QuasiBasis) -> QuasiBasis:
    """
    Replace each u_i by K copies of u_i / sqrt(K) with K = ceil(max ||u_i||^2).

    The squared norm is what puts u_i / sqrt(K) in the unit ball; the
    reconstruction identity and the index are unchanged.
    """
    max_sq = max(op_norm(u) ** 2 for u in qb.elements)
    k = max(1, math.ceil(max_sq - 1e-9))
    if k == 1:
        return QuasiBasis(
            elements=qb.elements,
            for_expectation=qb.for_expectation,
            index_element=qb.index_element,
            in_unit_ball=True,
        )
    elements = np.repeat(qb.elements / math.sqrt(k), k, axis=0)
    rescaled = QuasiBasis.from_elements(elements, qb.for_expectation)
    return QuasiBasis(
        elements=rescaled.elements,
        for_expectation=qb.for_expectation,
        index_element=rescaled.index_element,
        in_unit_ball=True,
    )


def watatani_index(qb: QuasiBasis) -> np.ndarray:
    """Index E = sum u_i u_i*."""
    return qb.index_element


def induced_quasi_basis(qb: QuasiBasis, e_ad: CondExpectation) -> QuasiBasis:
    """
    The family v_i = E_A^D(u_i), a quasi-basis for E_C^D restricted to A.

    If every u_i lies in the unit ball, so does every v_i.
    """
    elements = e_ad.apply_many(qb.elements)
    restricted = restrict(qb.for_expectation, e_ad.target)
    induced = QuasiBasis.from_elements(elements, restricted)
    if qb.in_unit_ball and not induced.in_unit_ball:
        # contractivity of E_A^D; only roundoff can push past 1
        induced = QuasiBasis(
            elements=induced.elements,
            for_expectation=restricted,
            index_element=induced.index_element,
            in_unit_ball=True,
        )
    return induced


def compatibility_residual(e_cd: CondExpectation, e_ad: CondExpectation) -> float:
    """
    Largest ||E_C^D(E_A^D(x)) - E_C^D(x)|| over the source basis.

    Raises:
        NotIntermediate: If target(e_ad) is not between target(e_cd) and source(e_cd)
    """
    _check_intermediate(e_cd, e_ad.target, DEFAULT_TOLERANCES.closure)
    basis = e_cd.source.basis
    through = e_cd.apply_many(e_ad.apply_many(basis))
    direct = e_cd.apply_many(basis)
    return float(np.max(np.linalg.norm(through - direct, ord=2, axis=(1, 2))))


def izumi_expectation(
    e_cd: CondExpectation,
    a: Subalgebra,
    qb_ca: QuasiBasis,
    tol: Optional[float] = None,
) -> CondExpectation:
    """
    E_A^D(x) = (Index E_C^A)^-1 sum_{i,j} u_i E_C^D(u_i* x u_j) u_j*.

    Args:
        e_cd: The expectation E_C^D
        a: An intermediate algebra C <= A <= D
        qb_ca: A quasi-basis for the restriction of e_cd to A
        tol: Allowed compatibility residual

    Returns:
        The conditional expectation of D onto A compatible with e_cd

    Raises:
        NotIntermediate: If A is not intermediate
        CompatibilityResidualExceeded: If the result fails E_C^A o E_A^D = E_C^D
    """
    tol = DEFAULT_TOLERANCES.compatibility if tol is None else tol
    _check_intermediate(e_cd, a, DEFAULT_TOLERANCES.closure)
    d = e_cd.source
    n = d.ambient_dim
    u = qb_ca.elements
    u_star = np.conj(np.transpose(u, (0, 2, 1)))
    count = u.shape[0]
    h_inv = np.linalg.inv(qb_ca.index_element)

    images = []
    for x in d.basis:
        sandwiches = np.einsum("iab,bc,jcd->ijad", u_star, x, u).reshape(-1, n, n)
        inner = e_cd.apply_many(sandwiches).reshape(count, count, n, n)
        total = np.einsum("iab,ijbc,jcd->ad", u, inner, u_star)
        images.append(h_inv @ total)
    e_ad = CondExpectation(source=d, target=a, matrix=d.coordinates_many(np.array(images)))

    residual = compatibility_residual(e_cd, e_ad)
    logger.debug("Izumi expectation onto dim-%d algebra: compatibility %.3e", a.dim, residual)
    if residual > tol:
        raise CompatibilityResidualExceeded(residual)
    return e_ad


def pimsner_popa_audit(e: CondExpectation, qb: QuasiBasis, trials: int, seed: int) -> float:
    """
    Smallest eigenvalue of E(x*x) - c^-1 x*x over seeded random x, c = ||Index E||.
    """
    c = op_norm(qb.index_element)
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(trials):
        x = random_element(e.ambient_dim, rng, e.source.basis)
        xx = dagger(x) @ x
        worst = min(worst, min_eigenvalue(e.apply(xx) - xx / c))
    return worst


def uniqueness_check(
    e_cd: CondExpectation,
    e1: CondExpectation,
    e2: CondExpectation,
    tol: Optional[float] = None,
) -> float:
    """
    Distance between two compatible expectations onto the same intermediate algebra.

    Raises:
        PreconditionFailed: If either expectation is not compatible with e_cd
    """
    tol = DEFAULT_TOLERANCES.compatibility if tol is None else tol
    for label, e in (("e1", e1), ("e2", e2)):
        residual = compatibility_residual(e_cd, e)
        if residual > tol:
            raise PreconditionFailed(f"{label} compatibility residual {residual:.3e}")
    basis = e_cd.source.basis
    diff = e1.apply_many(basis) - e2.apply_many(basis)
    return float(np.max(np.linalg.norm(diff, ord=2, axis=(1, 2))))
