"""Gaussian measures, the Feldman-Hajek comparison operator and divergences.

For two covariances ``C2`` and ``C1`` (``C1`` positive definite) the
comparison operator is ``R(C2 || C1) = C1^{-1/2} C2 C1^{-1/2} - I``. Its
eigenvalues ``lambda_i > -1`` determine every divergence between
``N(m, C2)`` and ``N(m, C1)`` through a spectral sum ``sum_i f(lambda_i)``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DeltaOutOfRange, DimensionMismatch, RhoOutOfRange, SingularBase
from .linalg import SpdOperator, as_spd, symmetrize


@dataclass(frozen=True)
class GaussianMeasure:
    mean: np.ndarray
    covariance: SpdOperator

    def __post_init__(self):
        cov = as_spd(self.covariance, name="covariance")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float)).copy()
        if mean.shape != (cov.dim,):
            raise DimensionMismatch(
                f"mean has shape {mean.shape}, covariance is {cov.dim}x{cov.dim}"
            )
        if not np.all(np.isfinite(mean)):
            raise ValueError("mean has non-finite entries")
        mean.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self):
        return self.covariance.dim

    @classmethod
    def centered(cls, covariance):
        cov = as_spd(covariance, name="covariance")
        return cls(np.zeros(cov.dim), cov)


def _require_positive(C, name):
    if not C.is_positive:
        raise SingularBase(
            f"{name} is not positive definite (min eigenvalue "
            f"{C.eigenvalues[-1]:.3e} <= tol_psd {C.tol_psd:.3e})"
        )


def fh_operator(C2, C1):
    """Return ``C1^{-1/2} C2 C1^{-1/2} - I`` (symmetric)."""
    C2 = as_spd(C2, name="C2")
    C1 = as_spd(C1, name="C1")
    if C1.dim != C2.dim:
        raise DimensionMismatch(f"C2 is {C2.dim}-dimensional, C1 is {C1.dim}-dimensional")
    _require_positive(C1, "C1")
    W = C1.inv_sqrt()
    return symmetrize(W @ C2.matrix @ W) - np.eye(C1.dim)


@dataclass(frozen=True)
class FhSpectrum:
    """Eigen-expansion of ``R(C2 || C1) = sum_i lambdas[i] w_i w_i^T``.

    ``v_basis`` holds ``v_i = sqrt(1 + lambda_i) C2^{-1/2} C1^{1/2} w_i``.
    """

    lambdas: np.ndarray
    w_basis: np.ndarray
    v_basis: np.ndarray


def fh_spectrum(C2, C1):
    C2 = as_spd(C2, name="C2")
    C1 = as_spd(C1, name="C1")
    _require_positive(C2, "C2")
    R = fh_operator(C2, C1)
    lam, W = np.linalg.eigh(R)
    lam = np.maximum(lam, -1.0 + 1e-15)
    V = np.sqrt(1.0 + lam) * (C2.inv_sqrt() @ C1.sqrt() @ W)
    return FhSpectrum(lam, W, V)


def fh_residuals(fhs, C2, C1):
    """Max-norm residuals of the four operator expansions of ``fhs``."""
    C2 = as_spd(C2)
    C1 = as_spd(C1)
    lam, W, V = fhs.lambdas, fhs.w_basis, fhs.v_basis
    I = np.eye(C1.dim)
    C1h, C1ih = C1.sqrt(), C1.inv_sqrt()
    C2h, C2ih = C2.sqrt(), C2.inv_sqrt()
    mu = -lam / (1.0 + lam)
    return {
        "w_expansion": np.abs(C1ih @ C2.matrix @ C1ih - I - (W * lam) @ W.T).max(),
        "v_expansion": np.abs(C2h @ C1.inv() @ C2h - I - (V * lam) @ V.T).max(),
        "reverse_v_expansion": np.abs(C2ih @ C1.matrix @ C2ih - I - (V * mu) @ V.T).max(),
        "reverse_w_expansion": np.abs(C1h @ C2.inv() @ C1h - I - (W * mu) @ W.T).max(),
        "v_orthonormal": np.abs(V.T @ V - I).max(),
    }


def equivalence_diagnostics(C2, C1):
    """Near-singularity score for a covariance pair.

    Finite-dimensional nondegenerate Gaussians are always equivalent, so
    instead of a boolean this reports how close ``I + R`` is to losing
    invertibility and how large the Hilbert-Schmidt norm of ``R`` is.
    """
    lam = fh_spectrum(C2, C1).lambdas
    return {
        "min_margin": float(np.min(1.0 + lam)) if lam.size else 1.0,
        "max_eigenvalue": float(np.max(lam)) if lam.size else 0.0,
        "hs_norm_sq": float(np.sum(lam ** 2)),
    }


def log_carleman_det2(lambdas):
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam <= -1.0):
        raise DeltaOutOfRange("Carleman determinant needs all eigenvalues > -1")
    return float(np.sum(np.log1p(lam) - lam))


def carleman_det2(lambdas):
    """``det_2(I + A) = prod_i (1 + lambda_i) exp(-lambda_i)``, evaluated in log space."""
    return math.exp(log_carleman_det2(lambdas))


# --- spectral loss functions -------------------------------------------------


def _check_rho(rho):
    if not 0.0 < rho < 1.0:
        raise RhoOutOfRange(f"rho must lie in (0, 1), got {rho}")


def f_kl(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (x - np.log1p(x))


def df_kl(x):
    x = np.asarray(x, dtype=float)
    return x / (2.0 * (1.0 + x))


def f_renyi(x, rho):
    x = np.asarray(x, dtype=float)
    c = 1.0 / (2.0 * rho * (1.0 - rho))
    return c * ((rho - 1.0) * np.log1p(x) + np.log1p((1.0 - rho) * x))


def df_renyi(x, rho):
    x = np.asarray(x, dtype=float)
    return (1.0 / (1.0 + (1.0 - rho) * x) - 1.0 / (1.0 + x)) / (2.0 * rho)


def reverse_map(x):
    """``alpha(x) = -x / (1 + x)``: swaps the roles of the two covariances."""
    x = np.asarray(x, dtype=float)
    return -x / (1.0 + x)


@dataclass(frozen=True)
class SpectralLossFn:
    """A member ``f`` of the spectral loss class, with optional derivative.

    Use the constructors :meth:`kl`, :meth:`reverse_kl`, :meth:`renyi`,
    :meth:`reverse_renyi`, :meth:`custom` or :meth:`parse`.
    """

    kind: str
    rho: float = None
    fn: object = field(default=None, repr=False, compare=False)
    deriv: object = field(default=None, repr=False, compare=False)

    @classmethod
    def kl(cls):
        return cls("kl")

    @classmethod
    def reverse_kl(cls):
        return cls("reverse_kl")

    @classmethod
    def renyi(cls, rho):
        _check_rho(rho)
        return cls("renyi", float(rho))

    @classmethod
    def reverse_renyi(cls, rho):
        _check_rho(rho)
        return cls("reverse_renyi", float(rho))

    @classmethod
    def custom(cls, fn, deriv=None, name="custom", check=True):
        loss = cls(name, None, fn, deriv)
        if check:
            loss.check_membership()
        return loss

    @classmethod
    def parse(cls, text):
        """Parse ``kl``, ``rkl``, ``renyi:RHO`` or ``rrenyi:RHO``."""
        key, _, arg = text.strip().partition(":")
        key = key.lower()
        if key == "kl":
            return cls.kl()
        if key in ("rkl", "reverse_kl"):
            return cls.reverse_kl()
        if key in ("renyi", "rrenyi", "reverse_renyi"):
            try:
                rho = float(arg)
            except ValueError:
                raise ValueError(f"loss {text!r} needs a numeric order, e.g. renyi:0.5") from None
            return cls.renyi(rho) if key == "renyi" else cls.reverse_renyi(rho)
        raise ValueError(f"unknown loss {text!r}; expected kl, rkl, renyi:RHO or rrenyi:RHO")

    @property
    def label(self):
        if self.kind == "renyi":
            return f"renyi:{self.rho:g}"
        if self.kind == "reverse_renyi":
            return f"rrenyi:{self.rho:g}"
        if self.kind == "reverse_kl":
            return "rkl"
        return self.kind

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "kl":
            return f_kl(x)
        if self.kind == "reverse_kl":
            return f_kl(reverse_map(x))
        if self.kind == "renyi":
            return f_renyi(x, self.rho)
        if self.kind == "reverse_renyi":
            return f_renyi(reverse_map(x), self.rho)
        return np.vectorize(self.fn, otypes=[float])(x)

    @property
    def has_derivative(self):
        return self.fn is None or self.deriv is not None

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        dalpha = -1.0 / (1.0 + x) ** 2
        if self.kind == "kl":
            return df_kl(x)
        if self.kind == "reverse_kl":
            return df_kl(reverse_map(x)) * dalpha
        if self.kind == "renyi":
            return df_renyi(x, self.rho)
        if self.kind == "reverse_renyi":
            return df_renyi(reverse_map(x), self.rho) * dalpha
        if self.deriv is not None:
            return np.vectorize(self.deriv, otypes=[float])(x)
        warnings.warn(
            f"loss {self.kind!r} has no analytic derivative; using central differences",
            RuntimeWarning,
            stacklevel=2,
        )
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        return (self(x + h) - self(x - h)) / (2.0 * h)

    def check_membership(self):
        """Sampled check of ``f(0) = 0`` and ``x f'(x) > 0`` on ``{+-10^k: k=-6..1}``.

        Points ``<= -1`` are outside the domain and skipped.
        """
        if abs(float(self(0.0))) > 1e-14:
            raise ValueError(f"loss {self.kind!r}: f(0) = {float(self(0.0))} != 0")
        grid = np.array([s * 10.0 ** k for k in range(-6, 2) for s in (1.0, -1.0)])
        grid = grid[grid > -1.0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            slope = grid * self.derivative(grid)
        bad = grid[~(slope > 0)]
        if bad.size:
            raise ValueError(f"loss {self.kind!r}: x f'(x) > 0 fails at x = {bad.tolist()}")
        return True


# --- divergences -------------------------------------------------------------


def _pair(N2, N1):
    if N1.dim != N2.dim:
        raise DimensionMismatch(f"measures have dimensions {N2.dim} and {N1.dim}")
    _require_positive(N1.covariance, "C1")
    return N1.covariance.apply_inv_sqrt(N2.mean - N1.mean)


def spectral_loss(f, C2, C1):
    """``L_f(C2 || C1) = sum_i f(lambda_i)`` over the eigenvalues of ``R(C2 || C1)``."""
    lam = np.linalg.eigvalsh(fh_operator(C2, C1))
    return float(np.sum(f(lam)))


def kl_divergence(N2, N1):
    """``D_KL(N2 || N1)`` between nondegenerate Gaussians."""
    z = _pair(N2, N1)
    lam = np.linalg.eigvalsh(fh_operator(N2.covariance, N1.covariance))
    return 0.5 * float(z @ z) - 0.5 * log_carleman_det2(lam)


def renyi_divergence(N2, N1, rho):
    """Renyi divergence of order ``rho``, normalized by ``1 / (rho (1 - rho))``.

    With this normalization ``rho -> 1`` recovers ``D_KL(N2 || N1)`` and
    ``rho -> 0`` recovers ``D_KL(N1 || N2)``.
    """
    _check_rho(rho)
    z = _pair(N2, N1)
    lam, W = np.linalg.eigh(fh_operator(N2.covariance, N1.covariance))
    coef = W.T @ z
    mean_term = 0.5 * float(np.sum(coef ** 2 / (1.0 + (1.0 - rho) * lam)))
    return mean_term + float(np.sum(f_renyi(lam, rho)))


def hellinger(N2, N1):
    """Hellinger distance ``sqrt(2 (1 - exp(-D_ren,1/2)))``; symmetric in its arguments."""
    d = renyi_divergence(N2, N1, 0.5)
    return math.sqrt(max(0.0, 2.0 * (1.0 - math.exp(-d))))
