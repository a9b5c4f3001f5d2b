"""Unital *-subalgebras of M_n stored as Hilbert-Schmidt orthonormal bases."""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import null_space

from cstarpert.core.matrices import (
    as_cmatrix,
    dagger,
    hs_norm,
    identity,
    matrix_unit,
    random_unit_element,
)
from cstarpert.utils.config import DEFAULT_TOLERANCES
from cstarpert.utils.exceptions import DimensionMismatch, NotNested

logger = logging.getLogger(__name__)


def _flat(matrices: np.ndarray) -> np.ndarray:
    return matrices.reshape(matrices.shape[0], -1)


def _extend_rows(
    rows: np.ndarray, candidates: np.ndarray, cutoff: float
) -> np.ndarray:
    """
    Append to an orthonormal row set the directions of `candidates` not yet spanned.

    Residuals are measured relative to each candidate's own norm so that
    roundoff in an already-spanned product is never mistaken for a new direction.
    """
    if candidates.shape[0] == 0:
        return rows
    norms = np.linalg.norm(candidates, axis=1)
    keep = norms > cutoff
    if not np.any(keep):
        return rows
    candidates = candidates[keep] / norms[keep, None]
    if rows.shape[0]:
        candidates = candidates - (candidates @ np.conj(rows).T) @ rows
    if np.max(np.linalg.norm(candidates, axis=1)) <= cutoff:
        return rows
    _, s, vh = np.linalg.svd(candidates, full_matrices=False)
    rank = int(np.sum(s > max(cutoff, cutoff * s[0])))
    if rank == 0:
        return rows
    new = vh[:rank]
    if rows.shape[0]:
        # one re-orthogonalization pass keeps the set orthonormal to machine precision
        new = new - (new @ np.conj(rows).T) @ rows
        new, _ = np.linalg.qr(new.T)
        new = new.T
    return np.vstack([rows, new]) if rows.shape[0] else new


def orthonormalize(matrices: Iterable[np.ndarray], cutoff: Optional[float] = None) -> np.ndarray:
    """
    HS-orthonormal basis of the span of the given matrices.

    Args:
        matrices: Square matrices of a common size
        cutoff: Singular-value cutoff deciding the span dimension

    Returns:
        Array of shape (k, n, n) whose elements satisfy Tr(b_i* b_j) = delta_ij
    """
    cutoff = DEFAULT_TOLERANCES.rank_cutoff if cutoff is None else cutoff
    stack = np.asarray([as_cmatrix(m) for m in matrices], dtype=np.complex128)
    if stack.shape[0] == 0:
        raise ValueError("Cannot orthonormalize an empty family without a size")
    n = stack.shape[1]
    rows = _extend_rows(np.zeros((0, n * n), dtype=np.complex128), _flat(stack), cutoff)
    return rows.reshape(-1, n, n)


@dataclass(frozen=True, eq=False)
class Subalgebra:
    """A unital *-closed subspace of M_n closed under products."""

    ambient_dim: int
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def flat_basis(self) -> np.ndarray:
        return _flat(self.basis)

    @property
    def contains_unit(self) -> bool:
        return self.residual(identity(self.ambient_dim)) <= DEFAULT_TOLERANCES.closure

    def _check(self, m: np.ndarray) -> np.ndarray:
        m = as_cmatrix(m)
        if m.shape[0] != self.ambient_dim:
            raise DimensionMismatch(self.ambient_dim, m.shape[0])
        return m

    def coordinates(self, m: np.ndarray) -> np.ndarray:
        """HS coordinates Tr(b_i* m) of m against the basis."""
        m = self._check(m)
        return np.conj(self.flat_basis) @ m.reshape(-1)

    def coordinates_many(self, stack: np.ndarray) -> np.ndarray:
        """Coordinates of a stack (N, n, n); returns an array of shape (dim, N)."""
        return np.conj(self.flat_basis) @ _flat(np.asarray(stack)).T

    def element(self, coords: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(coords), self.basis, axes=1)

    def project(self, m: np.ndarray) -> np.ndarray:
        """HS-orthogonal projection of m onto the span."""
        return self.element(self.coordinates(m))

    def residual(self, m: np.ndarray) -> float:
        m = self._check(m)
        return hs_norm(m - self.project(m))

    def contains(self, m: np.ndarray, tol: float = 1e-9) -> bool:
        return self.residual(m) <= tol

    def closure_residuals(self) -> dict:
        """Largest residuals of the adjoint, product and unit closure conditions."""
        adjoint = max(self.residual(dagger(b)) for b in self.basis)
        products = np.einsum("aij,bjk->abik", self.basis, self.basis).reshape(
            -1, self.ambient_dim, self.ambient_dim
        )
        coords = self.coordinates_many(products)
        back = np.tensordot(coords.T, self.basis, axes=1)
        product = float(np.max(np.linalg.norm(_flat(products - back), axis=1)))
        return {
            "adjoint": float(adjoint),
            "product": product,
            "unit": self.residual(identity(self.ambient_dim)),
        }

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Random element of the span with operator norm 1."""
        return random_unit_element(self.ambient_dim, rng, self.basis)


def _make(ambient_dim: int, basis: np.ndarray) -> Subalgebra:
    return Subalgebra(ambient_dim=ambient_dim, basis=np.asarray(basis, dtype=np.complex128))


def generate(
    ambient_dim: int,
    generators: Sequence[np.ndarray],
    cutoff: Optional[float] = None,
) -> Subalgebra:
    """
    Smallest unital *-subalgebra of M_n containing the generators.

    Starting from span{I, g, g*}, the span is repeatedly extended by the
    products of an orthonormal basis of that starting span with the elements
    added in the previous round, until the dimension stabilizes (at most n^2
    rounds).

    Args:
        ambient_dim: The size n of the ambient M_n
        generators: Matrices of size n x n
        cutoff: Rank cutoff for deciding new directions

    Returns:
        The generated Subalgebra

    Raises:
        DimensionMismatch: If a generator is not n x n
    """
    cutoff = DEFAULT_TOLERANCES.rank_cutoff if cutoff is None else cutoff
    seeds = [identity(ambient_dim)]
    for g in generators:
        g = as_cmatrix(g)
        if g.shape[0] != ambient_dim:
            raise DimensionMismatch(ambient_dim, g.shape[0])
        seeds.extend([g, dagger(g)])
    n2 = ambient_dim * ambient_dim
    rows = _extend_rows(np.zeros((0, n2), dtype=np.complex128), _flat(np.asarray(seeds)), cutoff)
    multipliers = rows.reshape(-1, ambient_dim, ambient_dim)
    fresh = multipliers
    for round_no in range(n2 + 1):
        before = rows.shape[0]
        for g in multipliers:
            products = np.einsum("ij,bjk->bik", g, fresh)
            rows = _extend_rows(rows, _flat(products), cutoff)
            if rows.shape[0] == n2:
                break
        logger.debug("generate round %d: dim %d -> %d", round_no, before, rows.shape[0])
        if rows.shape[0] == before or rows.shape[0] == n2:
            break
        fresh = rows[before:].reshape(-1, ambient_dim, ambient_dim)
    return _make(ambient_dim, rows.reshape(-1, ambient_dim, ambient_dim))


def contains(alg: Subalgebra, m: np.ndarray, tol: float) -> bool:
    """True iff the HS distance from m to the span is at most tol."""
    return alg.contains(m, tol)


def span_residual(a: Subalgebra, b: Subalgebra) -> float:
    """Largest HS residual of a's basis elements against b's span."""
    if a.ambient_dim != b.ambient_dim:
        raise DimensionMismatch(a.ambient_dim, b.ambient_dim)
    coords = b.coordinates_many(a.basis)
    back = np.tensordot(coords.T, b.basis, axes=1)
    return float(np.max(np.linalg.norm(_flat(a.basis - back), axis=1)))


def is_contained_in(a: Subalgebra, b: Subalgebra, tol: float = 1e-9) -> bool:
    return span_residual(a, b) <= tol


def same_span(a: Subalgebra, b: Subalgebra, tol: float = 1e-9) -> bool:
    return a.dim == b.dim and is_contained_in(a, b, tol) and is_contained_in(b, a, tol)


def relative_commutant(c: Subalgebra, d: Subalgebra) -> Subalgebra:
    """
    The relative commutant C' n D.

    Solves sum_k alpha_k [d_k, c_i] = 0 for all basis elements c_i of C, in
    the HS coordinates of D.

    Raises:
        NotNested: If C is not contained in D
    """
    nested = span_residual(c, d)
    if nested > DEFAULT_TOLERANCES.closure:
        raise NotNested(nested)
    n = d.ambient_dim
    blocks = []
    for ci in c.basis:
        comm = np.einsum("kij,jl->kil", d.basis, ci) - np.einsum("ij,kjl->kil", ci, d.basis)
        blocks.append(_flat(comm).T)
    system = np.vstack(blocks)
    kernel = null_space(system, rcond=DEFAULT_TOLERANCES.rank_cutoff)
    basis = np.tensordot(kernel.T, d.basis, axes=1)
    return _make(n, basis)


def center(alg: Subalgebra) -> Subalgebra:
    return relative_commutant(alg, alg)


def is_simple(alg: Subalgebra) -> bool:
    """A finite-dimensional C*-algebra is simple iff its center is trivial."""
    return center(alg).dim == 1


def generated_by(a: Subalgebra, b: Subalgebra) -> Subalgebra:
    """C*(A, B)."""
    if a.ambient_dim != b.ambient_dim:
        raise DimensionMismatch(a.ambient_dim, b.ambient_dim)
    return generate(a.ambient_dim, list(a.basis) + list(b.basis))


def conjugate(alg: Subalgebra, u: np.ndarray) -> Subalgebra:
    """The subalgebra u A u* for a unitary u."""
    u = as_cmatrix(u)
    if u.shape[0] != alg.ambient_dim:
        raise DimensionMismatch(alg.ambient_dim, u.shape[0])
    basis = np.einsum("ij,kjl,lm->kim", u, alg.basis, dagger(u))
    return _make(alg.ambient_dim, basis)


def scalars(n: int) -> Subalgebra:
    return _make(n, identity(n)[None] / np.sqrt(n))


def full_matrix_algebra(n: int) -> Subalgebra:
    return _make(n, np.array([matrix_unit(n, i, j) for i in range(n) for j in range(n)]))


def diagonal_algebra(n: int) -> Subalgebra:
    return _make(n, np.array([matrix_unit(n, i, i) for i in range(n)]))


def tensor_left_factor(k: int, m: int) -> Subalgebra:
    """M_k (x) I_m inside M_{km}."""
    eye = np.eye(m) / np.sqrt(m)
    return _make(k * m, np.array([np.kron(matrix_unit(k, i, j), eye) for i in range(k) for j in range(k)]))


def tensor_right_factor(k: int, m: int) -> Subalgebra:
    """I_k (x) M_m inside M_{km}."""
    eye = np.eye(k) / np.sqrt(k)
    return _make(k * m, np.array([np.kron(eye, matrix_unit(m, i, j)) for i in range(m) for j in range(m)]))


def block_diagonal_algebra(sizes: Sequence[int]) -> Subalgebra:
    """M_{s_1} (+) ... (+) M_{s_r} embedded block-diagonally in M_{sum s_i}."""
    n = int(sum(sizes))
    basis = []
    offset = 0
    for size in sizes:
        for i in range(size):
            for j in range(size):
                basis.append(matrix_unit(n, offset + i, offset + j))
        offset += size
    return _make(n, np.array(basis))
