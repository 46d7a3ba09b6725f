"""Small reference problems used by the tests, demos and CLI."""

import numpy as np

from .bip import LinearGaussianProblem


def scalar_problem():
    """``C_pr = G = C_obs = 1``: posterior variance 1/2, ``delta = 1``."""
    return LinearGaussianProblem.from_arrays([[1.0]], [[1.0]], [[1.0]])


def coordinate_problem():
    """Observe the first of two independent unit-variance coordinates with unit noise."""
    return LinearGaussianProblem.from_arrays([[1.0, 0.0]], [[1.0]], np.eye(2))


def random_spd(rng, dim, floor=0.1):
    A = rng.standard_normal((dim, dim))
    return A @ A.T / dim + floor * np.eye(dim)


def random_problem(seed, n=None, d=None, nonzero_mean=False):
    """Random well-conditioned problem with ``n <= 5`` and ``d <= 8`` unless given."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6)) if n is None else n
    d = int(rng.integers(1, 9)) if d is None else d
    G = rng.standard_normal((n, d))
    C_obs = random_spd(rng, n, floor=0.2)
    C_pr = random_spd(rng, d, floor=0.1)
    m_pr = rng.standard_normal(d) if nonzero_mean else None
    return LinearGaussianProblem.from_arrays(G, C_obs, C_pr, m_pr)


def power_law_diagonal(d, amplitude=1.0, exponent=2.0):
    k = np.arange(1, d + 1, dtype=float)
    return amplitude * k ** (-exponent)


def deconvolution_problem(d=64, n=16, width=0.05, noise_std=0.01, amplitude=1.0, exponent=2.0):
    """Gaussian-blur deconvolution on ``[0, 1]``.

    ``d`` unknowns at cell midpoints, ``n`` equispaced blurred point
    observations, white noise and a power-law diagonal prior.
    """
    x = (np.arange(d) + 0.5) / d
    t = (np.arange(n) + 0.5) / n
    kernel = np.exp(-0.5 * ((t[:, None] - x[None, :]) / width) ** 2)
    G = kernel / (np.sqrt(2.0 * np.pi) * width * d)
    C_obs = noise_std ** 2 * np.eye(n)
    C_pr = np.diag(power_law_diagonal(d, amplitude, exponent))
    return LinearGaussianProblem.from_arrays(G, C_obs, C_pr)
