"""Joint spectral data of the prior-preconditioned Hessian.

Everything the optimal approximations need comes from one symmetric
eigendecomposition ``C_pr^{1/2} H C_pr^{1/2} = sum_i delta_i w_i w_i^T``:

* ``lambda_i = -delta_i / (1 + delta_i)`` are the eigenvalues of
  ``R(C_pos || C_pr)`` and ``1 + lambda_i`` is the posterior-to-prior
  variance ratio along ``p_i = C_pr^{-1/2} w_i``;
* ``v_i = sqrt(1 + lambda_i) C_pos^{-1/2} C_pr^{1/2} w_i``;
* ``phi_i`` are the left singular vectors pairing with ``w_i`` in
  ``C_pr^{1/2} G^T C_obs^{-1/2} = sum_i sqrt(delta_i) w_i phi_i^T``.
"""

from dataclasses import dataclass

import numpy as np

from .bip import data_covariance, hessian, posterior_covariance
from .errors import IndexOutOfRange
from .linalg import RANK_CUTOFF, SpdOperator, symmetrize


@dataclass(frozen=True)
class PencilSpectrum:
    """Spectral data of a problem; ``lambdas`` nondecreasing, ``deltas`` nonincreasing.

    Only the first ``rank_h`` entries of ``lambdas`` are nonzero. The sign
    of each ``w_i`` (and the matching ``v_i``, ``phi_i``) is arbitrary;
    everything downstream uses outer products.
    """

    problem: object
    lambdas: np.ndarray
    deltas: np.ndarray
    w_basis: np.ndarray
    v_basis: np.ndarray
    phi_basis: np.ndarray
    rank_h: int
    C_pr_half: np.ndarray
    C_pr_inv_half: np.ndarray
    C_pos: SpdOperator
    C_pos_half: np.ndarray
    cutoff: float = RANK_CUTOFF

    @property
    def d(self):
        return self.w_basis.shape[0]

    @property
    def prior_directions(self):
        """Columns ``p_i = C_pr^{-1/2} w_i``, the likelihood-informed directions."""
        return self.C_pr_inv_half @ self.w_basis


def bayes_spectrum(p, cutoff=RANK_CUTOFF):
    """Eigen-analysis of the prior-preconditioned Hessian of problem ``p``.

    Eigenvalues ``delta_i <= cutoff * delta_max`` are set to exactly zero,
    so ``rank_h`` is the numerical rank at ``cutoff``. The null-space part
    of ``w_basis`` is whatever orthonormal completion the eigensolver
    returns.
    """
    C_pr = p.C_pr
    L = C_pr.sqrt()
    L_inv = C_pr.inv_sqrt()
    # B = C_obs^{-1/2} G C_pr^{1/2}; the preconditioned Hessian is B^T B.
    B = p.C_obs.apply_inv_sqrt(p.G) @ L
    delta, W = np.linalg.eigh(symmetrize(B.T @ B))
    delta, W = delta[::-1].copy(), W[:, ::-1].copy()
    delta_max = max(delta[0], 0.0)
    rank_h = int(np.count_nonzero(delta > cutoff * delta_max)) if delta_max > 0 else 0
    delta[rank_h:] = 0.0
    lam = -delta / (1.0 + delta)

    C_pos = posterior_covariance(p)
    C_pos_half = C_pos.sqrt()
    V = np.sqrt(1.0 + lam) * (C_pos.inv_sqrt() @ L @ W)
    phi = (B @ W[:, :rank_h]) / np.sqrt(delta[:rank_h])
    return PencilSpectrum(
        problem=p,
        lambdas=lam,
        deltas=delta,
        w_basis=W,
        v_basis=V,
        phi_basis=phi,
        rank_h=rank_h,
        C_pr_half=L,
        C_pr_inv_half=L_inv,
        C_pos=C_pos,
        C_pos_half=C_pos_half,
        cutoff=cutoff,
    )


def spectrum_residuals(s):
    """Residuals of the structural identities the spectrum must satisfy.

    Eigen-residuals are column norms (max over columns); orthonormality
    and SVD residuals are max-abs entries.
    """
    p = s.problem
    H = hessian(p)
    W, V, lam, delta = s.w_basis, s.v_basis, s.lambdas, s.deltas
    L, Lp = s.C_pr_half, s.C_pos_half
    I = np.eye(s.d)
    P = s.prior_directions
    k = s.rank_h

    def colmax(R):
        return float(np.linalg.norm(R, axis=0).max()) if R.size else 0.0

    svd_factor = L @ p.G.T @ p.C_obs.inv_sqrt()
    svd_rebuilt = (W[:, :k] * np.sqrt(delta[:k])) @ s.phi_basis.T
    return {
        "delta_lambda": float(np.abs(delta + lam / (1.0 + lam)).max()),
        "prior_preconditioned": colmax(L @ H @ L @ W - W * delta),
        "posterior_preconditioned": colmax(Lp @ H @ Lp @ V - V * (-lam)),
        "covariance_pencil": colmax(s.C_pos.matrix @ P - (p.C_pr.matrix @ P) * (1.0 + lam)),
        "w_orthonormal": float(np.abs(W.T @ W - I).max()),
        "v_orthonormal": float(np.abs(V.T @ V - I).max()),
        "phi_orthonormal": float(np.abs(s.phi_basis.T @ s.phi_basis - np.eye(k)).max()) if k else 0.0,
        "svd": float(np.abs(svd_factor - svd_rebuilt).max()),
    }


def variance_reduction(s, i):
    """Posterior-to-prior variance ratio ``1 + lambda_i`` along ``p_i`` (1-based ``i``)."""
    if not 1 <= i <= s.d:
        raise IndexOutOfRange(f"index must lie in [1, {s.d}], got {i}")
    return float(1.0 + s.lambdas[i - 1])


@dataclass(frozen=True)
class SquareRootFactors:
    """Non-symmetric factors with ``S_pos S_pos^T = C_pos`` and ``S_y S_y^T = C_y``."""

    S_pos: np.ndarray
    S_y: np.ndarray
    S_pos_inv: np.ndarray


def square_root_factors(p, s):
    """Build ``S_pos = C_pr^{1/2} (I + sum delta_i w_i w_i^T)^{-1/2}`` and
    ``S_y = C_obs^{1/2} (I + sum delta_i phi_i phi_i^T)^{1/2}``.
    """
    W, lam = s.w_basis, s.lambdas
    S_pos = s.C_pr_half @ ((W * np.sqrt(1.0 + lam)) @ W.T)
    S_pos_inv = ((W / np.sqrt(1.0 + lam)) @ W.T) @ s.C_pr_inv_half
    k = s.rank_h
    Phi = s.phi_basis
    inner = np.eye(p.n) + (Phi * (1.0 / np.sqrt(1.0 + lam[:k]) - 1.0)) @ Phi.T
    S_y = p.C_obs.sqrt() @ inner
    return SquareRootFactors(S_pos, S_y, S_pos_inv)


def square_root_residuals(p, s, f):
    C_y = data_covariance(p)
    Cpos = s.C_pos.matrix
    lhs = f.S_pos.T @ p.G.T @ p.C_obs.inv() @ f.S_y
    rhs = s.C_pr_half @ p.G.T @ p.C_obs.inv_sqrt()
    return {
        "S_pos": float(np.linalg.norm(f.S_pos @ f.S_pos.T - Cpos) / np.linalg.norm(Cpos)),
        "S_y": float(np.linalg.norm(f.S_y @ f.S_y.T - C_y) / np.linalg.norm(C_y)),
        "intertwining": float(np.abs(lhs - rhs).max()),
        "S_pos_inverse": float(np.abs(f.S_pos_inv @ f.S_pos - np.eye(p.d)).max()),
    }
