"""Dense complex matrix arithmetic and the elementary unitary/projection estimates."""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import polar

from cstarpert.utils.config import DEFAULT_TOLERANCES
from cstarpert.utils.exceptions import (
    DimensionMismatch,
    EpsOutOfRange,
    NotHermitian,
    NotInvertible,
    TooFar,
)

logger = logging.getLogger(__name__)


def as_cmatrix(m) -> np.ndarray:
    """
    Coerce input to a square complex128 array.

    Args:
        m: Array-like square matrix

    Returns:
        A complex128 ndarray of shape (n, n)

    Raises:
        DimensionMismatch: If the input is not a square 2-D array
    """
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch("square matrix", arr.shape)
    return arr


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(m).T


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=np.complex128)


def matrix_unit(dim: int, i: int, j: int) -> np.ndarray:
    """The matrix unit e_ij (zero-based indices)."""
    e = np.zeros((dim, dim), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def op_norm(m: np.ndarray) -> float:
    """Operator norm: the largest singular value."""
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def hs_norm(m: np.ndarray) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(np.asarray(m)))


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + dagger(m)) / 2


def is_hermitian(m: np.ndarray, tol: float = 1e-9) -> bool:
    return op_norm(m - dagger(m)) <= tol


def is_unitary(m: np.ndarray, tol: float = 1e-9) -> bool:
    return op_norm(dagger(m) @ m - identity(m.shape[0])) <= tol


def is_projection(m: np.ndarray, tol: float = 1e-9) -> bool:
    return op_norm(m @ m - m) + op_norm(m - dagger(m)) <= tol


def min_eigenvalue(m: np.ndarray) -> float:
    """Smallest eigenvalue of the Hermitian part of m."""
    if m.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(hermitian_part(m))[0])


def commutator_norm(x: np.ndarray, y: np.ndarray) -> float:
    return op_norm(x @ y - y @ x)


def polar_unitary(x: np.ndarray, floor: Optional[float] = None) -> np.ndarray:
    """
    Unitary part of the polar decomposition x = u|x|.

    Args:
        x: Square invertible matrix
        floor: Smallest admissible singular value (defaults to the package floor)

    Returns:
        The unitary u with x = u|x|

    Raises:
        NotInvertible: If the smallest singular value of x is below the floor
    """
    x = as_cmatrix(x)
    floor = DEFAULT_TOLERANCES.invertibility_floor if floor is None else floor
    sigma_min = float(np.linalg.svd(x, compute_uv=False)[-1])
    if sigma_min <= floor:
        raise NotInvertible(sigma_min)
    u, _ = polar(x)
    return u


def spectral_window_projection(
    a: np.ndarray,
    lo: float,
    hi: float,
    tol: float = 1e-9,
    pad: Optional[float] = None,
) -> np.ndarray:
    """
    Spectral projection of a Hermitian matrix onto the eigenvalues in [lo, hi].

    Args:
        a: Hermitian matrix
        lo: Lower end of the window
        hi: Upper end of the window
        tol: Allowed ||a - a*|| relative to max(1, ||a||)
        pad: Padding added to both closed endpoints

    Returns:
        The projection q = chi_[lo, hi](a)

    Raises:
        NotHermitian: If a is not Hermitian within tol
        ValueError: If lo > hi
    """
    a = as_cmatrix(a)
    if lo > hi:
        raise ValueError(f"Empty spectral window [{lo}, {hi}]")
    residual = op_norm(a - dagger(a))
    if residual > tol * max(1.0, op_norm(a)):
        raise NotHermitian(residual)
    pad = DEFAULT_TOLERANCES.window_pad if pad is None else pad
    evals, evecs = np.linalg.eigh(hermitian_part(a))
    inside = (evals >= lo - pad) & (evals <= hi + pad)
    kept = evecs[:, inside]
    return kept @ dagger(kept)


def projection_intertwiner(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """
    Unitary w close to I with w p w* = q.

    Built as the polar part of qp + (I - q)(I - p), which intertwines p and q
    and satisfies ||w - I|| <= sqrt(2)||p - q||.

    Raises:
        TooFar: If ||p - q|| >= 1
        DimensionMismatch: If p and q have different sizes
    """
    p = as_cmatrix(p)
    q = as_cmatrix(q)
    if p.shape != q.shape:
        raise DimensionMismatch(p.shape, q.shape)
    gap = op_norm(p - q)
    if gap >= 1.0:
        raise TooFar("projection_intertwiner", gap, 1.0)
    one = identity(p.shape[0])
    return polar_unitary(q @ p + (one - q) @ (one - p))


def random_element(
    dim: int,
    rng: np.random.Generator,
    basis: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """Gaussian random matrix, or a random combination of the given basis."""
    if basis is None:
        return (
            rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        ) / np.sqrt(2)
    basis = np.asarray(basis, dtype=np.complex128)
    coeffs = (
        rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
    ) / np.sqrt(2)
    return np.tensordot(coeffs, basis, axes=1)


def random_hermitian(
    dim: int,
    rng: np.random.Generator,
    basis: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """Random Hermitian matrix with operator norm 1 (inside span(basis) if given)."""
    h = hermitian_part(random_element(dim, rng, basis))
    norm = op_norm(h)
    if norm == 0.0:
        return identity(dim)
    return h / norm


def random_unit_element(
    dim: int,
    rng: np.random.Generator,
    basis: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """Random element of operator norm 1 (inside span(basis) if given)."""
    x = random_element(dim, rng, basis)
    norm = op_norm(x)
    if norm == 0.0:
        return identity(dim)
    return x / norm


def random_unitary_near_identity(
    dim: int,
    eps: float,
    seed: int,
    basis: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """
    Seeded unitary u = exp(itH) with ||u - I|| = eps.

    H is a random Hermitian generator of norm 1 drawn from span(basis) when a
    *-closed basis is given, so that u stays inside the algebra it spans.
    Since ||exp(itH) - I|| = 2 sin(t/2) for 0 <= t <= pi, the time is
    t = 2 arcsin(eps / 2).

    Args:
        dim: Matrix size
        eps: Target distance from the identity, 0 <= eps < 2
        seed: Seed for numpy.random.default_rng
        basis: Optional HS basis of a *-closed subspace containing the generator

    Returns:
        The unitary u

    Raises:
        EpsOutOfRange: If eps < 0 or eps >= 2
    """
    if eps < 0 or eps >= 2:
        raise EpsOutOfRange(eps)
    if eps == 0:
        return identity(dim)
    rng = np.random.default_rng(seed)
    h = random_hermitian(dim, rng, basis)
    evals, evecs = np.linalg.eigh(h)
    t = 2.0 * np.arcsin(eps / 2.0)
    u = (evecs * np.exp(1j * t * evals)) @ dagger(evecs)
    logger.debug("planted unitary dim=%d eps=%.3e seed=%d t=%.6g", dim, eps, seed, t)
    return u
