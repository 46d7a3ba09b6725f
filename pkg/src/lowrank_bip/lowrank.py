"""Optimal low-rank approximations of the posterior.

All constructions read off the leading ``r`` entries of a
:class:`~lowrank_bip.pencil.PencilSpectrum`:

* covariance ``C_r = C_pr - sum_{i<=r} (-lambda_i) (C_pr^{1/2} w_i)(C_pr^{1/2} w_i)^T``;
* precision ``P_r = C_pr^{-1} + sum_{i<=r} delta_i (C_pr^{-1/2} w_i)(C_pr^{-1/2} w_i)^T``,
  the inverse of ``C_r``;
* mean operators of the two approximation classes;
* the minimal losses these achieve, as tail sums over ``i > r``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotPositive, RankOutOfRange
from .gaussian import SpectralLossFn, f_kl
from .linalg import RANK_CUTOFF, SpdOperator, corange_projector, pinv, range_projector, symmetrize, truncated_svd

MINUS = "minus"
PLUS = "plus"


@dataclass(frozen=True)
class LowRankUpdate:
    """``C_pr - K K^T`` (sign ``minus``) or ``C_pr^{-1} + U U^T`` (sign ``plus``).

    ``base`` is always the prior covariance; the plus form updates its
    inverse. ``unique`` is only meaningful for the optimal updates.
    """

    base: SpdOperator
    factor: np.ndarray
    sign: str
    unique: bool = True

    def __post_init__(self):
        if self.sign not in (MINUS, PLUS):
            raise ValueError(f"sign must be 'minus' or 'plus', got {self.sign!r}")
        F = np.asarray(self.factor, dtype=float).reshape(self.base.dim, -1).copy()
        F.setflags(write=False)
        object.__setattr__(self, "factor", F)
        if self.sign == MINUS:
            lam = np.linalg.eigvalsh(self.assemble())
            if lam[0] <= 1e-12 * max(lam[-1], 0.0) or lam[0] <= 0.0:
                raise NotPositive(
                    f"C_pr - K K^T has minimum eigenvalue {lam[0]:.3e}; the update leaves the positive cone"
                )

    @property
    def width(self):
        return self.factor.shape[1]

    @property
    def rank(self):
        if self.width == 0:
            return 0
        return int(np.linalg.matrix_rank(self.factor, tol=None))

    @property
    def base_name(self):
        return "C_pr" if self.sign == MINUS else "C_pr^-1"

    def assemble(self):
        """The stored operator: a covariance for ``minus``, a precision for ``plus``."""
        F = self.factor
        if self.sign == MINUS:
            return symmetrize(self.base.matrix - F @ F.T)
        return symmetrize(self.base.inv() + F @ F.T)

    def covariance(self):
        A = self.assemble()
        return A if self.sign == MINUS else symmetrize(np.linalg.inv(A))

    def precision(self):
        A = self.assemble()
        return A if self.sign == PLUS else symmetrize(np.linalg.inv(A))


@dataclass(frozen=True)
class MeanApproxOperator:
    """Approximate posterior-mean map ``y -> matrix @ y``; ``klass`` is ``class1`` or ``class2``."""

    matrix: np.ndarray
    klass: str
    rank: int

    def __post_init__(self):
        if self.klass not in ("class1", "class2"):
            raise ValueError(f"klass must be 'class1' or 'class2', got {self.klass!r}")


def _check_rank(r, upper, what="rank"):
    if not isinstance(r, (int, np.integer)) or not 0 <= r <= upper:
        raise RankOutOfRange(f"{what} must be an integer in [0, {upper}], got {r!r}")
    return int(r)


def is_unique(s, r, rtol=1e-10):
    """True iff ``lambda_r = 0`` or ``lambda_r < lambda_{r+1}`` (1-based)."""
    lam = s.lambdas
    if r == 0 or r >= lam.size:
        return True
    a, b = lam[r - 1], lam[r]
    if a == 0.0:
        return True
    return bool(b - a > rtol * max(abs(a), abs(b)))


def optimal_covariance(s, r):
    r = _check_rank(r, s.d)
    cols = s.C_pr_half @ s.w_basis[:, :r] * np.sqrt(-s.lambdas[:r])
    return LowRankUpdate(s.problem.C_pr, cols, MINUS, is_unique(s, r))


def optimal_precision(s, r):
    r = _check_rank(r, s.d)
    cols = s.prior_directions[:, :r] * np.sqrt(s.deltas[:r])
    return LowRankUpdate(s.problem.C_pr, cols, PLUS, is_unique(s, r))


def convert_update(u, cutoff=RANK_CUTOFF):
    """Switch between the covariance (K) and precision (U) forms of the same operator.

    The result has the same factor width and rank; its assembled operator
    is the inverse of the input's. Singular values of the whitened factor
    at or below ``cutoff * max`` are treated as zero.
    """
    base = u.base
    flipped = PLUS if u.sign == MINUS else MINUS
    if u.width == 0:
        return LowRankUpdate(base, np.zeros((base.dim, 0)), flipped, u.unique)
    M = base.inv_sqrt() if u.sign == MINUS else base.sqrt()
    E, sv, _ = np.linalg.svd(M @ u.factor, full_matrices=False)
    if u.sign == MINUS:
        if np.any(sv ** 2 >= 1.0):
            raise NotPositive(f"update has d_i^2 = {sv.max() ** 2:.6g} >= 1")
        coef = sv / np.sqrt(1.0 - sv ** 2)
    else:
        coef = sv / np.sqrt(1.0 + sv ** 2)
    if sv[0] > 0:
        coef[sv <= cutoff * sv[0]] = 0.0
    new = (M @ E) * coef
    if new.shape[1] < u.width:
        new = np.hstack([new, np.zeros((base.dim, u.width - new.shape[1]))])
    return LowRankUpdate(base, new, flipped, u.unique)


def optimal_mean_class2(s, r):
    """Best rank-``r`` mean operator, unconstrained by the covariance structure."""
    p = s.problem
    r = _check_rank(r, min(p.n, p.d))
    k = min(r, s.rank_h)
    weights = np.sqrt(-s.lambdas[:k] * (1.0 + s.lambdas[:k]))
    core = (s.w_basis[:, :k] * weights) @ s.phi_basis[:, :k].T
    A = s.C_pr_half @ core @ p.C_obs.inv_sqrt()
    return MeanApproxOperator(A, "class2", k)


def optimal_mean_class1(s, r):
    """``C_r G^T C_obs^{-1}`` with ``C_r`` the optimal rank-``r`` covariance."""
    p = s.problem
    r = _check_rank(r, s.d)
    C_r = optimal_covariance(s, r).assemble()
    A = C_r @ p.G.T @ p.C_obs.inv()
    return MeanApproxOperator(A, "class1", min(r, s.rank_h))


MEAN_EXPONENT = {"class1": 3, "class2": 1}
TARGETS = ("cov", "mean1", "mean2", "joint1", "joint2")


def _klass(target):
    return "class1" if target.endswith("1") else "class2"


def predicted_loss(s, r, target="cov", loss=None):
    """Minimal loss of the rank-``r`` optimum.

    ``target``:

    * ``"cov"``: ``sum_{i>r} f(lambda_i)`` for the spectral loss ``loss``
      (forward KL by default);
    * ``"mean1"`` / ``"mean2"``: Bayes risk ``sum_{i>r} delta_i^3`` or
      ``sum_{i>r} delta_i``;
    * ``"joint1"`` / ``"joint2"``: ``sum_{i>r} f_kl(delta_i) + delta_i^a``,
      the reverse-KL covariance loss plus the Bayes risk of the mean.
    """
    r = _check_rank(r, s.d)
    tail_lam = s.lambdas[r:]
    tail_delta = s.deltas[r:]
    if target == "cov":
        f = SpectralLossFn.kl() if loss is None else loss
        return float(np.sum(f(tail_lam)))
    if target in ("mean1", "mean2"):
        return float(np.sum(tail_delta ** MEAN_EXPONENT[_klass(target)]))
    if target in ("joint1", "joint2"):
        a = MEAN_EXPONENT[_klass(target)]
        return float(np.sum(f_kl(tail_delta) + tail_delta ** a))
    raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")


def expected_joint_kl(s, r, klass="class2"):
    """Expected reverse KL of the joint optimum, ``sum_{i>r} f_kl(delta_i) + delta_i^a / 2``.

    Differs from ``predicted_loss(..., "joint*")`` only by the factor 1/2
    the KL divergence puts on the mean term.
    """
    r = _check_rank(r, s.d)
    tail = s.deltas[r:]
    return float(np.sum(f_kl(tail) + 0.5 * tail ** MEAN_EXPONENT[klass]))


def joint_approximation(s, r, klass="class2"):
    """Optimal (mean operator, covariance update) pair for the joint problem."""
    if klass == "class1":
        mean = optimal_mean_class1(s, r)
    elif klass == "class2":
        mean = optimal_mean_class2(s, min(r, s.problem.n, s.d))
    else:
        raise ValueError(f"klass must be 'class1' or 'class2', got {klass!r}")
    return mean, optimal_covariance(s, r)


def reduced_rank_solve(T, M, S, r, cutoff=RANK_CUTOFF):
    """Minimize ``||M - T N S||_F`` over ``rank(N) <= r``.

    Returns ``T^+ (P_ran(T) M P_ker(S)perp)_r S^+``, the solution that also
    satisfies ``N = P_ker(T)perp N P_ran(S)``. Shapes: ``T`` (h4, h3),
    ``M`` (h4, h1), ``S`` (h2, h1); the result is (h3, h2).
    """
    if r < 0:
        raise RankOutOfRange(f"rank must be >= 0, got {r}")
    T = np.atleast_2d(np.asarray(T, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if T.shape[0] != M.shape[0] or S.shape[1] != M.shape[1]:
        raise ValueError(f"shapes T {T.shape}, M {M.shape}, S {S.shape} are not conformable")
    X = range_projector(T, cutoff) @ M @ corange_projector(S, cutoff)
    X_r = truncated_svd(X, r, cutoff).reconstruct()
    return pinv(T, cutoff) @ X_r @ pinv(S, cutoff)
