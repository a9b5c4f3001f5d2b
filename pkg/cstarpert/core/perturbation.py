"""Perturbation of intermediate subalgebras: distances, close homomorphisms, conjugating unitaries."""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from cstarpert.core.algebra import (
    Subalgebra,
    conjugate,
    generated_by,
    span_residual,
)
from cstarpert.core.basic_construction import (
    LocalizedModule,
    jones_projection,
    lambda_op,
    localize,
)
from cstarpert.core.expectation import (
    CondExpectation,
    QuasiBasis,
    compatibility_residual,
    induced_quasi_basis,
    izumi_expectation,
    quasi_basis,
    restrict,
    unit_ball_rescale,
)
from cstarpert.core.matrices import (
    commutator_norm,
    dagger,
    identity,
    is_unitary,
    op_norm,
    polar_unitary,
    projection_intertwiner,
    spectral_window_projection,
)
from cstarpert.utils.config import DEFAULT_TOLERANCES, Tolerances
from cstarpert.utils.exceptions import (
    CompatibilityRequired,
    CompatibilityResidualExceeded,
    ConjugationFailed,
    CStarPertError,
    NotHomomorphism,
    PreconditionFailed,
    ReadbackFailed,
    TooFar,
)

logger = logging.getLogger(__name__)

LinearMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BoundCheck:
    """One inequality lhs <= rhs, evaluated numerically."""

    name: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def holds(self, tol: float = DEFAULT_TOLERANCES.bound_slack) -> bool:
        return self.lhs <= self.rhs + tol

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack}


@dataclass(frozen=True)
class DistanceEstimate:
    """Certified bracket lower <= d(A, B) <= upper."""

    lower: float
    upper: float
    method_notes: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class HomomorphismMap:
    """A unital *-homomorphism between subalgebras, in HS coordinates."""

    domain: Subalgebra
    codomain: Subalgebra
    matrix: np.ndarray
    mult_residual: float
    unital_residual: float
    fixes_c_residual: float
    diagnostics: dict = field(default_factory=dict)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.codomain.element(self.matrix @ self.domain.coordinates(x))

    def apply_many(self, stack: np.ndarray) -> np.ndarray:
        coords = self.matrix @ self.domain.coordinates_many(stack)
        return np.tensordot(coords.T, self.codomain.basis, axes=1)


@dataclass(frozen=True, eq=False)
class Intertwiner:
    """The unitary u with phi1 = Ad(u) o phi2, with its residuals."""

    unitary: np.ndarray
    s_gap: float
    phi_distance_upper: float
    intertwining_residual: float
    commutes_with_c_residual: float


@dataclass(eq=False)
class PerturbationReport:
    """Outcome of the full pipeline that conjugates A onto B."""

    unitary: np.ndarray
    d_estimate: DistanceEstimate
    psi_bound_lhs: float  # sampled, so a lower estimate of the sup
    psi_bound_rhs: float
    psi_bound_certified: float  # sqrt(n) HS upper for the same sup
    u_bound_lhs: float
    u_bound_rhs: float
    conjugation_residual: float
    u_commutes_with_c_residual: float
    u_in_generated_residual: float
    n_quasi_basis: int
    gamma: float
    delta: float
    s_gap: float
    bounds: List[BoundCheck] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def gamma_satisfied(self) -> bool:
        return self.d_estimate.upper < self.gamma

    def violations(self, tol: float = DEFAULT_TOLERANCES.bound_slack) -> List[BoundCheck]:
        return [b for b in self.bounds if not b.holds(tol)]


def gamma_threshold(n_basis: int) -> float:
    """gamma = (10N)^-4."""
    if n_basis < 1:
        raise ValueError("n_basis must be at least 1")
    return 1.0 / float((10 * n_basis) ** 4)


def _sample_unit_ball(domain: Subalgebra, samples: int, seed: int) -> np.ndarray:
    """Basis elements scaled to operator norm 1, followed by seeded random unit elements."""
    scaled = [b / op_norm(b) for b in domain.basis]
    rng = np.random.default_rng(seed)
    scaled.extend(domain.sample(rng) for _ in range(samples))
    return np.array(scaled)


def map_norm_bounds(
    fn: LinearMap,
    domain: Subalgebra,
    samples: int = 100,
    seed: int = 0,
) -> Tuple[float, float]:
    """
    Lower and upper estimates of sup ||fn(a)|| over the unit ball of the domain.

    The upper value is certified: ||fn(a)|| <= ||fn(a)||_HS <= ||M|| ||a||_HS
    <= sqrt(n) ||M|| ||a||, with M the matrix of fn from HS coordinates to
    flattened matrices. The lower value is attained on sampled contractions.
    """
    n = domain.ambient_dim
    images = np.array([fn(b) for b in domain.basis])
    upper = math.sqrt(n) * op_norm(images.reshape(domain.dim, -1).T)
    lower = 0.0
    for a in _sample_unit_ball(domain, samples, seed):
        lower = max(lower, op_norm(fn(a)))
    return lower, upper


def homomorphism_from_images(
    domain: Subalgebra,
    codomain: Subalgebra,
    images: np.ndarray,
    c: Optional[Subalgebra],
    diagnostics: Optional[dict] = None,
) -> HomomorphismMap:
    """Tabulate a map given by the images of the domain basis and measure its residuals."""
    matrix = codomain.coordinates_many(images)
    draft = HomomorphismMap(domain, codomain, matrix, 0.0, 0.0, 0.0)
    n = domain.ambient_dim
    basis = domain.basis
    products = np.einsum("aij,bjk->abik", basis, basis).reshape(-1, n, n)
    image_products = np.einsum("aij,bjk->abik", images, images).reshape(-1, n, n)
    mult = float(np.max(np.linalg.norm(draft.apply_many(products) - image_products, ord=2, axis=(1, 2))))
    unital = op_norm(draft.apply(identity(n)) - identity(n))
    fixes_c = 0.0
    if c is not None:
        fixes_c = float(np.max(np.linalg.norm(draft.apply_many(c.basis) - c.basis, ord=2, axis=(1, 2))))
    return HomomorphismMap(
        domain=domain,
        codomain=codomain,
        matrix=matrix,
        mult_residual=mult,
        unital_residual=unital,
        fixes_c_residual=fixes_c,
        diagnostics=diagnostics or {},
    )


def identity_homomorphism(a: Subalgebra, c: Optional[Subalgebra] = None) -> HomomorphismMap:
    return homomorphism_from_images(a, a, a.basis.copy(), c)


def verify_homomorphism(hom: HomomorphismMap, tolerances: Tolerances = DEFAULT_TOLERANCES) -> None:
    """Raise NotHomomorphism when a residual of hom exceeds its tolerance."""
    for check, residual, limit in (
        ("multiplicativity", hom.mult_residual, tolerances.homomorphism),
        ("unital", hom.unital_residual, tolerances.unital),
        ("fixes_c", hom.fixes_c_residual, tolerances.fixes_c),
    ):
        if residual > limit:
            raise NotHomomorphism(check, residual, limit)


def multiplicativity_defect(
    phi: LinearMap,
    psi_hom: HomomorphismMap,
    samples: int = 100,
    seed: int = 0,
) -> BoundCheck:
    """
    Audit ||phi(xy) - phi(x)phi(y)|| <= 3||phi - psi|| ||x|| ||y|| on sampled contractions.

    The sampled pair with the smallest slack is reported.
    """
    domain = psi_hom.domain
    _, distance = map_norm_bounds(lambda x: phi(x) - psi_hom.apply(x), domain, samples, seed)
    rng = np.random.default_rng(seed + 1)
    worst = BoundCheck("multiplicativity_defect", 0.0, 3 * distance)
    for _ in range(samples):
        x = domain.sample(rng)
        y = domain.sample(rng)
        lhs = op_norm(phi(x @ y) - phi(x) @ phi(y))
        rhs = 3 * distance * op_norm(x) * op_norm(y)
        if lhs - rhs > worst.lhs - worst.rhs:
            worst = BoundCheck("multiplicativity_defect", lhs, rhs)
    return worst


def expectation_vs_inclusion(
    e_b: CondExpectation,
    a: Subalgebra,
    d_upper: float,
    samples: int = 100,
    seed: int = 0,
) -> List[BoundCheck]:
    """
    Audit ||E_B|_A - iota_A|| <= 2d and ||E_B(xy) - E_B(x)E_B(y)|| <= 6d ||x|| ||y||.

    d(A, B) is replaced by the certified upper estimate d_upper; both right
    sides increase with d.
    """
    lower, _ = map_norm_bounds(lambda x: e_b.apply(x) - x, a, samples, seed)
    rng = np.random.default_rng(seed + 1)
    worst_pair = 0.0
    for _ in range(samples):
        x = a.sample(rng)
        y = a.sample(rng)
        defect = op_norm(e_b.apply(x @ y) - e_b.apply(x) @ e_b.apply(y))
        worst_pair = max(worst_pair, defect / (op_norm(x) * op_norm(y)))
    return [
        BoundCheck("expectation_vs_inclusion", lower, 2 * d_upper),
        BoundCheck("expectation_multiplicativity", worst_pair, 6 * d_upper),
    ]


def jones_distance_bound(
    a: Subalgebra,
    e_bd: CondExpectation,
    jones_gap: float,
    index_norm: float,
    samples: int = 100,
    seed: int = 0,
) -> BoundCheck:
    """Audit ||a - E_B^D(a)|| <= ||Index E_C^D|| ||e_A - e_B|| over sampled contractions a in A."""
    worst = 0.0
    for x in _sample_unit_ball(a, samples, seed):
        worst = max(worst, op_norm(x - e_bd.apply(x)))
    return BoundCheck("jones_distance", worst, index_norm * jones_gap)


def distance_estimate(
    a: Subalgebra,
    b: Subalgebra,
    mod: LocalizedModule,
    e_a: CondExpectation,
    e_b: CondExpectation,
    samples: int = 100,
    seed: int = 0,
    index_norm: Optional[float] = None,
    witness: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> DistanceEstimate:
    """
    Certified bracket for the distance between the unit balls of A and B.

    upper is the smallest of ||Index E_C^D|| ||e_A - e_B||, the symmetric
    sweep bound sqrt(n) max(||(id - E_B)|_A||_HS, ||(id - E_A)|_B||_HS) and,
    when a witness unitary u with uAu* = B is supplied, 2 ||u - I||.
    lower is the largest dist_HS(x, other span) / sqrt(n) over sampled
    contractions x of either algebra. The sweep's value on those samples is
    recorded as sweep_sampled; it estimates the sweep from below and
    certifies nothing.

    Raises:
        CompatibilityRequired: If either expectation is not compatible
        PreconditionFailed: If the witness is not unitary or does not carry A onto B
    """
    tol = DEFAULT_TOLERANCES.conjugation if tol is None else tol
    p_a = jones_projection(mod, e_a)
    p_b = jones_projection(mod, e_b)
    if index_norm is None:
        index_norm = op_norm(quasi_basis(mod.base_expectation).index_element)
    jones_gap = (p_a - p_b).norm()
    jones = index_norm * jones_gap

    sampled_ab, sweep_ab = map_norm_bounds(lambda x: x - e_b.apply(x), a, samples, seed)
    sampled_ba, sweep_ba = map_norm_bounds(lambda x: x - e_a.apply(x), b, samples, seed + 1)
    sweep = max(sweep_ab, sweep_ba)
    candidates = {"jones": jones, "sweep": sweep}
    if witness is not None:
        if not is_unitary(witness, tol):
            raise PreconditionFailed("witness is not unitary")
        moved = span_residual(conjugate(a, witness), b)
        if a.dim != b.dim or moved > tol:
            raise PreconditionFailed(f"witness does not carry A onto B (residual {moved:.3e})")
        candidates["witness"] = 2 * op_norm(witness - identity(a.ambient_dim))

    root_n = math.sqrt(a.ambient_dim)
    lower = 0.0
    for x in _sample_unit_ball(a, samples, seed):
        lower = max(lower, b.residual(x) / root_n)
    for y in _sample_unit_ball(b, samples, seed + 1):
        lower = max(lower, a.residual(y) / root_n)

    source = min(candidates, key=candidates.get)
    upper = candidates[source]
    notes = {
        "samples": samples,
        "seed": seed,
        "index_norm": index_norm,
        "jones_gap": jones_gap,
        "jones_bound": jones,
        "sweep_bound": sweep,
        "sweep_sampled": max(sampled_ab, sampled_ba),
        "upper_source": source,
    }
    if witness is not None:
        notes["witness_bound"] = candidates["witness"]
    logger.debug("distance bracket [%.3e, %.3e] (%s)", lower, upper, notes["upper_source"])
    return DistanceEstimate(lower=lower, upper=upper, method_notes=notes)


def close_homomorphism(
    mod: LocalizedModule,
    a: Subalgebra,
    b: Subalgebra,
    e_ad: CondExpectation,
    e_bd: CondExpectation,
    qb_unit: QuasiBasis,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> HomomorphismMap:
    """
    The unital *-homomorphism psi: A -> B close to E_B^D|_A that fixes C.

    With v_i = E_A^D(u_i) and h = Index E_C^A, the operator
    t = sum lambda(h^-1) lambda(v_i) e_B lambda(v_i*) commutes with lambda(A)
    and lies within delta of e_B. Its spectral projection q near 1 is moved
    onto e_B by a unitary w, and psi(a) is read back from
    e_B w* lambda(a) w e_B eta(1).

    Raises:
        PreconditionFailed: If qb_unit is not in the unit ball
        CompatibilityRequired: If e_ad or e_bd is not compatible with E_C^D
        TooFar: If delta >= 1/2
        ReadbackFailed: If psi(a) leaves B
        NotHomomorphism: If psi is not a unital *-homomorphism fixing C
    """
    if not qb_unit.in_unit_ball:
        raise PreconditionFailed("close_homomorphism needs a unit-ball quasi-basis")
    e_b = jones_projection(mod, e_bd, tolerances.compatibility).matrix
    jones_projection(mod, e_ad, tolerances.compatibility)
    qb_a = induced_quasi_basis(qb_unit, e_ad)
    n_basis = qb_unit.size
    h_inv = np.linalg.inv(qb_a.index_element)

    lambdas = [lambda_op(mod, v).matrix for v in qb_a.elements]
    core = sum(lv @ e_b @ dagger(lv) for lv in lambdas)
    t = lambda_op(mod, h_inv).matrix @ core
    sym = (t + dagger(t)) / 2
    delta = op_norm(sym - e_b)
    commutator = max(op_norm(e_b @ dagger(lv) - dagger(lv) @ e_b) for lv in lambdas)
    logger.debug("close_homomorphism: N=%d delta=%.3e", n_basis, delta)
    if delta >= 0.5:
        raise TooFar("close_homomorphism", delta, 0.5)

    q = spectral_window_projection(sym, 1 - delta, 1 + delta, pad=tolerances.window_pad)
    w = projection_intertwiner(e_b, q)
    eta_one = mod.vector(identity(mod.ambient.ambient_dim))

    images = []
    worst_readback = 0.0
    for x in a.basis:
        compressed = e_b @ dagger(w) @ lambda_op(mod, x).matrix @ w @ e_b
        y = mod.readback(compressed @ eta_one)
        worst_readback = max(worst_readback, b.residual(y))
        images.append(b.project(y))
    if worst_readback > tolerances.readback:
        raise ReadbackFailed(worst_readback)

    diagnostics = {
        "delta": delta,
        "n_basis": n_basis,
        "q_gap": op_norm(q - e_b),
        "w_distance": op_norm(w - identity(w.shape[0])),
        "commutator": commutator,
        "readback_residual": worst_readback,
    }
    c = mod.base_expectation.target
    psi = homomorphism_from_images(a, b, np.array(images), c, diagnostics)
    verify_homomorphism(psi, tolerances)
    return psi


def intertwining_unitary(
    phi1: HomomorphismMap,
    phi2: HomomorphismMap,
    qb_a_unit: QuasiBasis,
    c: Optional[Subalgebra] = None,
    samples: int = 100,
    seed: int = 0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Intertwiner:
    """
    The unitary u with phi1 = Ad(u) o phi2, as the polar part of
    s = sum phi1(h^-1) phi1(v_i) phi2(v_i*), h = Index E_C^A.

    Raises:
        PreconditionFailed: If phi1 or phi2 is not a homomorphism fixing C
        TooFar: If ||s - I|| >= 1
        ConjugationFailed: If u does not intertwine phi1 and phi2 or misses C'
    """
    for label, phi in (("phi1", phi1), ("phi2", phi2)):
        try:
            verify_homomorphism(phi, tolerances)
        except NotHomomorphism as exc:
            raise PreconditionFailed(f"{label}: {exc}") from exc
    a = phi1.domain
    n = a.ambient_dim
    v = qb_a_unit.elements
    v_star = np.conj(np.transpose(v, (0, 2, 1)))
    h_inv = np.linalg.inv(qb_a_unit.index_element)
    s = phi1.apply(h_inv) @ np.einsum("kij,kjl->il", phi1.apply_many(v), phi2.apply_many(v_star))
    s_gap = op_norm(s - identity(n))
    logger.debug("intertwining_unitary: ||s - I|| = %.3e", s_gap)
    if s_gap >= 1.0:
        raise TooFar("intertwining_unitary", s_gap, 1.0)
    u = polar_unitary(s)

    left = phi1.apply_many(a.basis)
    right = phi2.apply_many(a.basis)
    residual = float(
        np.max(np.linalg.norm(np.einsum("kij,jl->kil", left, u) - np.einsum("ij,kjl->kil", u, right), ord=2, axis=(1, 2)))
    )
    commutes = 0.0
    if c is not None:
        commutes = max(commutator_norm(u, x) for x in c.basis)
    if residual > tolerances.commutation:
        raise ConjugationFailed(residual, "phi1 != Ad(u) o phi2 on A")
    if commutes > tolerances.commutation:
        raise ConjugationFailed(commutes, "u does not commute with C")
    _, distance = map_norm_bounds(lambda x: phi1.apply(x) - phi2.apply(x), a, samples, seed)
    return Intertwiner(
        unitary=u,
        s_gap=s_gap,
        phi_distance_upper=distance,
        intertwining_residual=residual,
        commutes_with_c_residual=commutes,
    )


def compatible_expectation(
    e_cd: CondExpectation,
    alg: Subalgebra,
    given: Optional[CondExpectation],
    tolerances: Tolerances,
) -> CondExpectation:
    if given is not None:
        residual = compatibility_residual(e_cd, given)
        if residual > tolerances.compatibility:
            raise CompatibilityRequired(residual)
        return given
    try:
        return izumi_expectation(
            e_cd, alg, quasi_basis(restrict(e_cd, alg)), tolerances.compatibility
        )
    except CompatibilityResidualExceeded as exc:
        raise CompatibilityRequired(exc.residual) from exc


def perturb(
    c: Subalgebra,
    d: Subalgebra,
    e_cd: CondExpectation,
    a: Subalgebra,
    b: Subalgebra,
    samples: int = 100,
    seed: int = 0,
    e_ad: Optional[CondExpectation] = None,
    e_bd: Optional[CondExpectation] = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> PerturbationReport:
    """
    Find a unitary u in C' n D with u A u* = B for close intermediate algebras.

    Stages: compatible expectations (Izumi's formula unless supplied),
    unit-ball quasi-basis of E_C^D and gamma = (10N)^-4, distance bracket,
    close homomorphism psi, intertwiner u with psi = Ad(u), then the
    finite-dimensional equality check (u A u* inside B plus equal dimension).

    Raises:
        TooFar: If delta >= 1/2 or ||s - I|| >= 1
        CompatibilityRequired: If an intermediate algebra has no compatible expectation
        ConjugationFailed: If u A u* does not match B, u misses C' or u is not in C*(A, B)
        NotHomomorphism: If psi fails a homomorphism check
    """
    timings: Dict[str, float] = {}
    clock = time.perf_counter()

    def lap(stage: str) -> None:
        nonlocal clock
        now = time.perf_counter()
        timings[stage] = now - clock
        clock = now

    e_ad = compatible_expectation(e_cd, a, e_ad, tolerances)
    e_bd = compatible_expectation(e_cd, b, e_bd, tolerances)
    lap("expectations")

    qb_unit = unit_ball_rescale(quasi_basis(e_cd))
    n_basis = qb_unit.size
    gamma = gamma_threshold(n_basis)
    index_norm = op_norm(qb_unit.index_element)
    lap("quasi_basis")

    mod = localize(e_cd)
    estimate = distance_estimate(a, b, mod, e_ad, e_bd, samples, seed, index_norm)
    d_upper = estimate.upper
    logger.info("perturb: N=%d gamma=%.3e d_upper=%.3e", n_basis, gamma, d_upper)
    if d_upper >= gamma:
        logger.warning("d_upper %.3e is not below gamma %.3e; attempting the construction", d_upper, gamma)
    lap("distance")

    psi = close_homomorphism(mod, a, b, e_ad, e_bd, qb_unit, tolerances)
    lap("close_homomorphism")

    qb_a_unit = induced_quasi_basis(qb_unit, e_ad)
    inter = intertwining_unitary(
        psi, identity_homomorphism(a, c), qb_a_unit, c, samples, seed, tolerances
    )
    u = inter.unitary
    lap("intertwining_unitary")

    moved = conjugate(a, u)
    conjugation = max(span_residual(moved, b), span_residual(b, moved))
    if moved.dim != b.dim:
        raise ConjugationFailed(conjugation, f"dim uAu* = {moved.dim} but dim B = {b.dim}")
    if conjugation > tolerances.conjugation:
        raise ConjugationFailed(conjugation)
    in_generated = generated_by(a, b).residual(u)
    if in_generated > tolerances.membership:
        raise ConjugationFailed(in_generated, "u is not in C*(A, B)")
    lap("verification")

    psi_gap_lower, psi_gap_upper = map_norm_bounds(
        lambda x: e_bd.apply(x) - psi.apply(x), a, samples, seed
    )
    _, inclusion_upper = map_norm_bounds(
        lambda x: e_bd.apply(x) - x, a, samples, seed
    )
    id_gap_lower, _ = map_norm_bounds(lambda x: psi.apply(x) - x, a, samples, seed)
    delta = psi.diagnostics["delta"]
    u_gap = op_norm(u - identity(u.shape[0]))

    bounds = [
        BoundCheck("close_homomorphism", psi_gap_lower, 8 * math.sqrt(3) * n_basis * math.sqrt(d_upper)),
        BoundCheck("close_homomorphism_w", psi_gap_lower, 2 * psi.diagnostics["w_distance"]),
        BoundCheck("delta_chain", delta, n_basis * math.sqrt(6 * d_upper)),
        BoundCheck("intertwiner", u_gap, math.sqrt(2) * n_basis * inter.phi_distance_upper),
        BoundCheck("psi_identity_chain", id_gap_lower, psi_gap_upper + inclusion_upper),
        jones_distance_bound(
            a, e_bd, estimate.method_notes["jones_gap"], index_norm, samples, seed
        ),
        multiplicativity_defect(e_bd.apply, psi, samples, seed),
    ]
    bounds.extend(expectation_vs_inclusion(e_bd, a, d_upper, samples, seed))
    bounds.append(_final_distance_check(a, b, e_ad, u, d_upper, samples, seed))
    for check in bounds:
        if not check.holds(tolerances.bound_slack):
            logger.warning("bound %s violated: lhs %.3e > rhs %.3e", check.name, check.lhs, check.rhs)
    lap("audit")

    return PerturbationReport(
        unitary=u,
        d_estimate=estimate,
        psi_bound_lhs=psi_gap_lower,
        psi_bound_rhs=8 * math.sqrt(3) * n_basis * math.sqrt(d_upper),
        psi_bound_certified=psi_gap_upper,
        u_bound_lhs=u_gap,
        u_bound_rhs=math.sqrt(2) * n_basis * inter.phi_distance_upper,
        conjugation_residual=conjugation,
        u_commutes_with_c_residual=inter.commutes_with_c_residual,
        u_in_generated_residual=in_generated,
        n_quasi_basis=n_basis,
        gamma=gamma,
        delta=delta,
        s_gap=inter.s_gap,
        bounds=bounds,
        timings=timings,
    )


def _final_distance_check(
    a: Subalgebra,
    b: Subalgebra,
    e_ad: CondExpectation,
    u: np.ndarray,
    d_upper: float,
    samples: int,
    seed: int,
) -> BoundCheck:
    """||y - u E_A(y) u*|| <= 2 d_upper + 2||u - I|| for sampled contractions y of B."""
    u_gap = op_norm(u - identity(u.shape[0]))
    worst = 0.0
    for y in _sample_unit_ball(b, samples, seed):
        x = e_ad.apply(y)
        worst = max(worst, op_norm(y - u @ x @ dagger(u)))
    return BoundCheck("conjugated_distance", worst, 2 * d_upper + 2 * u_gap)


@dataclass(frozen=True)
class PairOutcome:
    """What happened when two intermediate algebras were compared."""

    i: int
    j: int
    jones_distance: float
    within_epsilon: bool
    attempted: bool
    status: str
    detail: str = ""
    conjugation_residual: Optional[float] = None


@dataclass(eq=False)
class ClusterReport:
    """Partition of intermediate algebras into unitary-equivalence classes."""

    classes: List[List[int]]
    jones_distances: np.ndarray
    epsilon: float
    pairs: List[PairOutcome]
    witnesses: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict)


class _UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            lo, hi = min(ri, rj), max(ri, rj)
            self.parent[hi] = lo


def cluster_intermediates(
    entries: Sequence[Tuple[Subalgebra, CondExpectation]],
    mod: LocalizedModule,
    attempt_below: float = 1.0,
    samples: int = 50,
    seed: int = 0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> ClusterReport:
    """
    Group intermediate algebras into classes of unitarily equivalent ones.

    epsilon = (2 (10N)^4 ||Index E_C^D||)^-1 is recorded for every pair; the
    construction is attempted whenever the Jones projections are closer than
    `attempt_below`, and a successful perturb merges the two classes.
    """
    e_cd = mod.base_expectation
    c, d = e_cd.target, e_cd.source
    qb_unit = unit_ball_rescale(quasi_basis(e_cd))
    index_norm = op_norm(qb_unit.index_element)
    epsilon = 1.0 / (2 * float((10 * qb_unit.size) ** 4) * index_norm)

    count = len(entries)
    projections: List[Optional[np.ndarray]] = []
    entry_errors: Dict[int, str] = {}
    for idx, (_, e_ad) in enumerate(entries):
        try:
            projections.append(jones_projection(mod, e_ad, tolerances.compatibility).matrix)
        except CStarPertError as exc:
            projections.append(None)
            entry_errors[idx] = str(exc)

    distances = np.full((count, count), np.nan)
    for i in range(count):
        for j in range(count):
            if projections[i] is not None and projections[j] is not None:
                distances[i, j] = op_norm(projections[i] - projections[j])

    groups = _UnionFind(count)
    pairs: List[PairOutcome] = []
    witnesses: Dict[Tuple[int, int], np.ndarray] = {}
    for i in range(count):
        for j in range(i + 1, count):
            if i in entry_errors or j in entry_errors:
                pairs.append(PairOutcome(i, j, math.nan, False, False, "entry_error",
                                         entry_errors.get(i) or entry_errors.get(j) or ""))
                continue
            gap = float(distances[i, j])
            within = gap < epsilon
            if gap >= attempt_below:
                pairs.append(PairOutcome(i, j, gap, within, False, "not_attempted"))
                continue
            (a, e_ad), (b, e_bd) = entries[i], entries[j]
            try:
                report = perturb(c, d, e_cd, a, b, samples, seed, e_ad, e_bd, tolerances)
            except TooFar as exc:
                pairs.append(PairOutcome(i, j, gap, within, True, "too_far", str(exc)))
                continue
            except CStarPertError as exc:
                pairs.append(PairOutcome(i, j, gap, within, True, type(exc).__name__, str(exc)))
                continue
            groups.union(i, j)
            witnesses[(i, j)] = report.unitary
            logger.info("cluster: merged %d and %d (jones distance %.3e)", i, j, gap)
            pairs.append(
                PairOutcome(i, j, gap, within, True, "conjugate", "",
                            report.conjugation_residual)
            )

    buckets: Dict[int, List[int]] = {}
    for idx in range(count):
        buckets.setdefault(groups.find(idx), []).append(idx)
    classes = [buckets[root] for root in sorted(buckets)]
    return ClusterReport(
        classes=classes,
        jones_distances=distances,
        epsilon=epsilon,
        pairs=pairs,
        witnesses=witnesses,
    )
