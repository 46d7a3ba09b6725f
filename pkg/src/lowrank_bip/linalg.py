"""Dense symmetric linear algebra primitives.

Everything here works on small dense numpy arrays. Symmetric positive
(semi)definite matrices are wrapped in :class:`SpdOperator`, which computes
its eigendecomposition once at construction and derives square roots,
inverses and weighted norms from it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DeltaOutOfRange,
    DimensionMismatch,
    IndefiniteInput,
    NotSymmetric,
    RankOutOfRange,
    SingularBase,
)

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10
RANK_CUTOFF = 1e-12


def check_symmetric(A, rtol=SYMMETRY_RTOL, name="matrix"):
    """Raise NotSymmetric unless ``|A_ij - A_ji| <= rtol * max(1, |A_ij|)``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"{name} must be square, got shape {A.shape}")
    gap = np.abs(A - A.T)
    bound = rtol * np.maximum(1.0, np.abs(A))
    if np.any(gap > bound):
        i, j = np.unravel_index(np.argmax(gap - bound), A.shape)
        raise NotSymmetric(
            f"{name} is not symmetric: |A[{i},{j}] - A[{j},{i}]| = {gap[i, j]:.3e}"
        )
    return A


def symmetrize(A):
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


class SpdOperator:
    """Symmetric positive (semi)definite matrix with a cached eigendecomposition.

    Parameters
    ----------
    matrix : (d, d) array_like
        Must be symmetric to ``SYMMETRY_RTOL``; it is symmetrized before
        factorization.
    name : str
        Used in error messages.
    check : bool
        Skip the symmetry check when the caller has just symmetrized.

    Eigenvalues are stored nonincreasing. Eigenvalues in
    ``[-tol_psd, 0)`` with ``tol_psd = 1e-10 * lambda_max`` are clipped to
    zero; anything more negative raises :class:`IndefiniteInput`.
    """

    __slots__ = ("matrix", "eigenvalues", "eigenvectors", "tol_psd", "name")

    def __init__(self, matrix, name="matrix", check=True):
        A = np.array(matrix, dtype=float, copy=True)
        if A.ndim == 0:
            A = A.reshape(1, 1)
        if check:
            check_symmetric(A, name=name)
        A = symmetrize(A)
        if not np.all(np.isfinite(A)):
            raise IndefiniteInput(f"{name} has non-finite entries")
        lam, V = np.linalg.eigh(A)
        lam, V = lam[::-1], V[:, ::-1]
        lam_max = max(lam[0], 0.0) if lam.size else 0.0
        tol = PSD_RTOL * lam_max
        if lam.size and lam[-1] < -tol:
            raise IndefiniteInput(
                f"{name} has eigenvalue {lam[-1]:.3e} below -tol_psd = {-tol:.3e}"
            )
        lam = np.where(lam < 0.0, 0.0, lam)
        A.setflags(write=False)
        lam.setflags(write=False)
        V = np.ascontiguousarray(V)
        V.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", V)
        object.__setattr__(self, "tol_psd", tol)
        object.__setattr__(self, "name", name)

    def __setattr__(self, key, value):
        raise AttributeError("SpdOperator is immutable")

    def __repr__(self):
        return f"SpdOperator(name={self.name!r}, dim={self.dim}, definiteness={self.definiteness!r})"

    @classmethod
    def from_diagonal(cls, diag, name="matrix"):
        return cls(np.diag(np.asarray(diag, dtype=float)), name=name)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def is_positive(self):
        return self.dim > 0 and self.eigenvalues[-1] > self.tol_psd

    @property
    def definiteness(self):
        return "positive" if self.is_positive else "semidefinite"

    def _spectral(self, values):
        V = self.eigenvectors
        return symmetrize((V * values) @ V.T)

    def power(self, p):
        """Return ``A**p`` through the eigendecomposition (positive A for p < 0)."""
        if p < 0 and not self.is_positive:
            raise SingularBase(f"{self.name} is not positive definite")
        return self._spectral(self.eigenvalues ** p)

    def sqrt(self):
        return self._spectral(np.sqrt(self.eigenvalues))

    def inv_sqrt(self):
        return self.power(-0.5)

    def inv(self):
        return self.power(-1.0)

    def apply_inv_sqrt(self, x):
        """Apply ``A^{-1/2}`` to a vector or to the columns of a matrix."""
        if not self.is_positive:
            raise SingularBase(f"{self.name} is not positive definite")
        V = self.eigenvectors
        coef = V.T @ x
        scale = self.eigenvalues ** -0.5
        coef = coef * (scale if coef.ndim == 1 else scale[:, None])
        return V @ coef

    def weighted_norm_sq(self, x):
        """Return ``||A^{-1/2} x||^2``."""
        z = self.apply_inv_sqrt(np.asarray(x, dtype=float))
        return float(z @ z)

    def logdet(self):
        return float(np.sum(np.log(self.eigenvalues)))


def as_spd(A, name="matrix"):
    return A if isinstance(A, SpdOperator) else SpdOperator(A, name=name)


def sym_sqrt(A):
    """Unique symmetric positive semidefinite square root, as an SpdOperator."""
    A = as_spd(A)
    return SpdOperator(A.sqrt(), name=f"sqrt({A.name})", check=False)


@dataclass(frozen=True)
class SvdFactorization:
    """Thin SVD ``M = left @ diag(singular_values) @ right.T`` of the retained triples."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray
    rank: int

    def reconstruct(self):
        return (self.left * self.singular_values) @ self.right.T


def _svd(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        k = min(M.shape)
        return np.zeros((M.shape[0], k)), np.zeros(k), np.zeros((M.shape[1], k))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return U, s, Vt.T


def numerical_rank(s, cutoff=RANK_CUTOFF):
    """Number of singular values above ``cutoff * max(s)``."""
    s = np.asarray(s)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.count_nonzero(s > cutoff * s[0]))


def truncated_svd(M, r, cutoff=RANK_CUTOFF):
    """Leading ``r`` singular triples of ``M``.

    Values at or below ``cutoff * sigma_max`` count as zero and are never
    returned, so ``r >= rank(M)`` yields the reduced SVD. Ties at
    ``sigma_r`` keep the solver's order, which makes the result non-unique.
    """
    if r < 0:
        raise RankOutOfRange(f"rank must be >= 0, got {r}")
    U, s, V = _svd(M)
    k = min(r, numerical_rank(s, cutoff))
    return SvdFactorization(U[:, :k], s[:k].copy(), V[:, :k], k)


def pinv(M, cutoff=RANK_CUTOFF):
    """Moore-Penrose pseudoinverse, dropping singular values <= cutoff * sigma_max."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    U, s, V = _svd(M)
    k = numerical_rank(s, cutoff)
    return (V[:, :k] / s[:k]) @ U[:, :k].T


def range_projector(M, cutoff=RANK_CUTOFF):
    """Orthogonal projector onto the column space of ``M``."""
    U, s, _ = _svd(M)
    Uk = U[:, : numerical_rank(s, cutoff)]
    return Uk @ Uk.T


def corange_projector(M, cutoff=RANK_CUTOFF):
    """Orthogonal projector onto ``ker(M)``-perp, i.e. the row space of ``M``."""
    _, s, V = _svd(M)
    Vk = V[:, : numerical_rank(s, cutoff)]
    return Vk @ Vk.T


def perturbed_identity_inverse(basis, deltas):
    """Inverse of ``I + sum_i deltas[i] e_i e_i^T`` for orthonormal columns ``e_i``.

    Returns ``I - sum_i deltas[i] / (1 + deltas[i]) e_i e_i^T``.
    """
    E = np.atleast_2d(np.asarray(basis, dtype=float))
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if E.shape[1] != deltas.size:
        raise DimensionMismatch(f"{E.shape[1]} basis vectors but {deltas.size} deltas")
    if np.any(deltas <= -1.0):
        raise DeltaOutOfRange(f"all deltas must exceed -1, got min {deltas.min()}")
    if deltas.size and not np.allclose(E.T @ E, np.eye(deltas.size), rtol=0, atol=1e-10):
        raise ValueError("basis columns are not orthonormal")
    coef = deltas / (1.0 + deltas)
    return np.eye(E.shape[0]) - (E * coef) @ E.T
