"""Linear Gaussian inverse problems ``Y = G x + noise``.

The prior is ``N(m_pr, C_pr)`` and the noise ``N(0, C_obs)``; both
covariances must be positive definite. Conditioning is exact.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, SingularBase
from .gaussian import GaussianMeasure
from .linalg import SpdOperator, as_spd, symmetrize


@dataclass(frozen=True)
class LinearGaussianProblem:
    G: np.ndarray
    C_obs: SpdOperator
    prior: GaussianMeasure

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float)).copy()
        C_obs = as_spd(self.C_obs, name="C_obs")
        prior = self.prior
        if not isinstance(prior, GaussianMeasure):
            prior = GaussianMeasure.centered(prior)
        n, d = G.shape
        if n < 1 or d < 1:
            raise DimensionMismatch(f"G must be at least 1x1, got {G.shape}")
        if C_obs.dim != n:
            raise DimensionMismatch(f"G has {n} rows but C_obs is {C_obs.dim}x{C_obs.dim}")
        if prior.dim != d:
            raise DimensionMismatch(f"G has {d} columns but the prior is {prior.dim}-dimensional")
        if not C_obs.is_positive:
            raise SingularBase("C_obs is not positive definite")
        if not prior.covariance.is_positive:
            raise SingularBase("C_pr is not positive definite")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "C_obs", C_obs)
        object.__setattr__(self, "prior", prior)

    @classmethod
    def from_arrays(cls, G, C_obs, C_pr, m_pr=None):
        C_pr = as_spd(C_pr, name="C_pr")
        m_pr = np.zeros(C_pr.dim) if m_pr is None else m_pr
        return cls(G, as_spd(C_obs, name="C_obs"), GaussianMeasure(m_pr, C_pr))

    @property
    def n(self):
        return self.G.shape[0]

    @property
    def d(self):
        return self.G.shape[1]

    @property
    def C_pr(self):
        return self.prior.covariance

    @property
    def m_pr(self):
        return self.prior.mean


@dataclass(frozen=True)
class PosteriorSolution:
    """Exact posterior plus the linear map ``y -> m_pos(y)`` and the Hessian.

    For a nonzero prior mean ``m_pos(y) = m_pr + mean_operator @ (y - G m_pr)``.
    """

    posterior: GaussianMeasure
    mean_operator: np.ndarray
    hessian: np.ndarray

    def mean(self, y, problem):
        y = np.asarray(y, dtype=float)
        return problem.m_pr + self.mean_operator @ (y - problem.G @ problem.m_pr)


def hessian(p):
    """``G^T C_obs^{-1} G``."""
    B = p.C_obs.apply_inv_sqrt(p.G)
    return symmetrize(B.T @ B)


def data_covariance(p):
    """Marginal covariance ``C_y = G C_pr G^T + C_obs`` of the data."""
    return symmetrize(p.G @ p.C_pr.matrix @ p.G.T + p.C_obs.matrix)


def posterior_covariance(p):
    C_pr = p.C_pr.matrix
    CGt = C_pr @ p.G.T
    factor = scipy.linalg.cho_factor(data_covariance(p))
    C_pos = C_pr - CGt @ scipy.linalg.cho_solve(factor, CGt.T)
    return SpdOperator(symmetrize(C_pos), name="C_pos", check=False)


def solve_posterior(p, y=None):
    """Condition the prior on data ``y`` (or only build the covariance and mean map)."""
    C_pos = posterior_covariance(p)
    A = C_pos.matrix @ p.G.T @ p.C_obs.inv()
    if y is None:
        y = p.G @ p.m_pr
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (p.n,):
        raise DimensionMismatch(f"data has shape {y.shape}, expected ({p.n},)")
    m_pos = p.m_pr + A @ (y - p.G @ p.m_pr)
    return PosteriorSolution(GaussianMeasure(m_pos, C_pos), A, hessian(p))


def simulate_data(p, x_true, seed):
    """Draw ``G x_true + C_obs^{1/2} z`` with ``z`` from ``numpy.random.default_rng(seed)``.

    The generator is numpy's PCG64, so outputs are reproducible across
    platforms for a fixed seed.
    """
    x_true = np.atleast_1d(np.asarray(x_true, dtype=float))
    if x_true.shape != (p.d,):
        raise DimensionMismatch(f"x_true has shape {x_true.shape}, expected ({p.d},)")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(p.n)
    return p.G @ x_true + p.C_obs.sqrt() @ z
