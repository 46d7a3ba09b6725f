"""Exact posteriors and optimal low-rank approximations for linear Gaussian inverse problems."""

from .bip import LinearGaussianProblem, PosteriorSolution, hessian, simulate_data, solve_posterior
from .gaussian import (
    FhSpectrum,
    GaussianMeasure,
    SpectralLossFn,
    carleman_det2,
    fh_operator,
    fh_spectrum,
    hellinger,
    kl_divergence,
    renyi_divergence,
    spectral_loss,
)
from .linalg import SpdOperator, SvdFactorization, perturbed_identity_inverse, pinv, sym_sqrt, truncated_svd
from .lowrank import (
    LowRankUpdate,
    MeanApproxOperator,
    convert_update,
    joint_approximation,
    optimal_covariance,
    optimal_mean_class1,
    optimal_mean_class2,
    optimal_precision,
    predicted_loss,
    reduced_rank_solve,
)
from .oracle import bayes_risk_exact, bayes_risk_mc, brute_force_cov_opt, jf_gradient
from .pencil import PencilSpectrum, SquareRootFactors, bayes_spectrum, square_root_factors, variance_reduction

__version__ = "0.1.0"
