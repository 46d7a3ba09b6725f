"""Independent checks for the closed-form optima.

* exact and Monte Carlo Bayes risk of a mean operator;
* the loss ``J_f(U) = L_f(C_pos || (C_pr^{-1} + U U^T)^{-1})`` and its
  analytic gradient;
* a multi-start gradient descent on ``J_f`` that tries to beat the
  closed-form covariance optimum.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .bip import data_covariance, posterior_covariance, solve_posterior
from .errors import NonConvergence
from .lowrank import MeanApproxOperator
from .pencil import square_root_factors
from .linalg import symmetrize

GRAD_TOL = 1e-8
MAX_ITER = 10_000
DOMAIN_MARGIN = 1e-10
# iterations without loss decrease above round-off before a restart gives up
STALL_ITERS = 20


@dataclass(frozen=True)
class RiskEstimate:
    value: float
    stderr: float = 0.0
    samples: int = 0


@dataclass(frozen=True)
class OptimizerResult:
    argmin_factor: np.ndarray
    loss: float
    iterations: int
    gradient_norm: float
    restarts_used: int
    converged: bool
    restart_losses: tuple = ()


def _matrix(A):
    return A.matrix if isinstance(A, MeanApproxOperator) else np.asarray(A, dtype=float)


def bayes_risk_exact(A, p, s):
    """``E ||A Y - m_pos(Y)||^2_{C_pos^{-1}}`` as ``||S_pos^{-1} A S_y - C_pr^{1/2} G^T C_obs^{-1/2}||_F^2``.

    ``Y`` is centered at ``G m_pr``; for a nonzero prior mean the operator
    acts on ``y - G m_pr``.
    """
    f = square_root_factors(p, s)
    target = s.C_pr_half @ p.G.T @ p.C_obs.inv_sqrt()
    R = f.S_pos_inv @ _matrix(A) @ f.S_y - target
    return RiskEstimate(float(np.sum(R * R)))


def bayes_risk_mc(A, p, n_samples, seed):
    """Monte Carlo estimate of the Bayes risk with its standard error.

    Draws ``Y - G m_pr ~ N(0, C_y)`` and weights errors with the symmetric
    ``C_pos^{-1/2}``; shares no code path with :func:`bayes_risk_exact`.
    """
    if n_samples < 100:
        raise ValueError(f"n_samples must be >= 100, got {n_samples}")
    rng = np.random.default_rng(seed)
    sol = solve_posterior(p)
    C_pos = sol.posterior.covariance
    L = np.linalg.cholesky(data_covariance(p))
    Y = L @ rng.standard_normal((p.n, n_samples))
    err = C_pos.apply_inv_sqrt((_matrix(A) - sol.mean_operator) @ Y)
    vals = np.sum(err * err, axis=0)
    stderr = float(vals.std(ddof=1) / np.sqrt(n_samples))
    return RiskEstimate(float(vals.mean()), stderr, int(n_samples))


class CovarianceLoss:
    """``J_f`` and its gradient for one problem, with the factorizations cached."""

    def __init__(self, p, f):
        self.f = f
        C_pos = posterior_covariance(p)
        self.C_pos_half = C_pos.sqrt()
        # C_pos^{1/2} C_pr^{-1} C_pos^{1/2} - I = g(0)
        self.g0 = symmetrize(self.C_pos_half @ p.C_pr.inv() @ self.C_pos_half) - np.eye(p.d)

    def spectrum(self, U):
        B = self.C_pos_half @ U
        return np.linalg.eigh(self.g0 + symmetrize(B @ B.T))

    def value(self, U):
        gamma, _ = self.spectrum(U)
        if np.min(gamma, initial=np.inf) <= -1.0 + DOMAIN_MARGIN:
            return np.inf
        return float(np.sum(self.f(gamma)))

    def value_and_gradient(self, U):
        gamma, E = self.spectrum(U)
        if np.min(gamma, initial=np.inf) <= -1.0 + DOMAIN_MARGIN:
            return np.inf, np.full_like(U, np.nan)
        Q = self.C_pos_half @ E
        weights = self.f.derivative(gamma)
        grad = 2.0 * ((Q * weights) @ Q.T) @ U
        return float(np.sum(self.f(gamma))), grad


def jf_loss(U, p, f):
    """``J_f(U) = sum_i f(gamma_i)`` with ``gamma`` the eigenvalues of ``g(U)``."""
    return CovarianceLoss(p, f).value(np.asarray(U, dtype=float).reshape(p.d, -1))


def jf_gradient(U, p, f):
    """Matrix ``D`` with ``J_f'(U)(V) = <D, V>_F``.

    ``D = 2 sum_i f'(gamma_i) (C_pos^{1/2} e_i)(C_pos^{1/2} e_i)^T U`` for the
    eigenpairs ``(gamma_i, e_i)`` of
    ``g(U) = C_pos^{1/2} (C_pr^{-1} + U U^T) C_pos^{1/2} - I``.
    """
    U = np.asarray(U, dtype=float).reshape(p.d, -1)
    return CovarianceLoss(p, f).value_and_gradient(U)[1]


def _descend(obj, U, grad_tol, max_iter):
    """Gradient descent; Barzilai-Borwein trial step, Armijo backtracking.

    Stops at ``grad_tol``, after ``max_iter`` iterations, or once the loss
    has stopped decreasing beyond round-off (the gradient floor of an
    ill-conditioned problem can sit above ``grad_tol``).
    """
    J, g = obj.value_and_gradient(U)
    gnorm = float(np.linalg.norm(g))
    step = 1.0
    it = stalled = 0
    while it < max_iter and gnorm > grad_tol and stalled < STALL_ITERS:
        it += 1
        gg = gnorm ** 2
        while True:
            U_new = U - step * g
            J_new = obj.value(U_new)
            if J_new <= J - 1e-4 * step * gg:
                break
            step *= 0.5
            if step < 1e-20:
                return U, J, gnorm, it
        J_new, g_new = obj.value_and_gradient(U_new)
        dU, dg = U_new - U, g_new - g
        curv = float(np.sum(dU * dg))
        step = float(np.sum(dU * dU)) / curv if curv > 0 else 2.0 * step
        stalled = stalled + 1 if J - J_new <= 1e-15 * max(1.0, abs(J)) else 0
        U, J, g = U_new, J_new, g_new
        gnorm = float(np.linalg.norm(g))
    return U, J, gnorm, it


def brute_force_cov_opt(p, r, f, restarts=10, seed=0, grad_tol=GRAD_TOL, max_iter=MAX_ITER, strict=False):
    """Minimize ``J_f`` over ``d x r`` factors by gradient descent from random starts.

    Each iteration tries a Barzilai-Borwein step and backtracks until the
    Armijo condition holds; restart ``k`` draws its start from
    ``default_rng(seed + k)`` with entries ``N(0, 1/d)``. The best restart
    (lowest loss, then lowest index) is returned. If none reaches
    ``grad_tol`` a :class:`NonConvergence` warning is issued, or raised
    with ``strict=True``.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    obj = CovarianceLoss(p, f)
    runs = []
    for k in range(restarts):
        rng = np.random.default_rng(seed + k)
        U0 = rng.standard_normal((p.d, r)) / np.sqrt(p.d)
        U, J, gnorm, it = _descend(obj, U0, grad_tol, max_iter)
        runs.append((J, k, U, gnorm, it))
    J, k, U, gnorm, it = min(runs, key=lambda t: (t[0], t[1]))
    converged = any(run[3] <= grad_tol for run in runs)
    if not converged:
        msg = f"no restart reached gradient norm {grad_tol:g} in {max_iter} iterations"
        if strict:
            raise NonConvergence(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return OptimizerResult(U, J, it, gnorm, restarts, converged, tuple(run[0] for run in runs))


def optimal_factor(s, r):
    """Closed-form minimizer ``U = [sqrt(delta_i) C_pr^{-1/2} w_i]_{i<=r}`` of ``J_f``."""
    return s.prior_directions[:, :r] * np.sqrt(s.deltas[:r])


def expected_joint_loss(mean, update, p, s):
    """Exact ``E D_KL(N(A Y, C) || N(m_pos(Y), C_pos))`` for a (mean, covariance) pair.

    Evaluates the Gaussian KL formula averaged over ``Y`` directly
    (trace form), without the closed-form tail sums.
    """
    C = update.covariance()
    C_pos = s.C_pos
    sol = solve_posterior(p)
    D = _matrix(mean) - sol.mean_operator
    Cpi = C_pos.inv()
    mean_part = 0.5 * float(np.trace(Cpi @ D @ data_covariance(p) @ D.T))
    sign, logdet_ratio = np.linalg.slogdet(np.linalg.solve(C_pos.matrix, C))
    cov_part = 0.5 * float(np.trace(Cpi @ C) - p.d - logdet_ratio)
    return mean_part, cov_part
