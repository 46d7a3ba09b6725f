"""Walk through the two smallest problems where every quantity is known by hand.

Scalar problem: G = C_obs = C_pr = 1, so the posterior variance is 1/2 and the
single relative data strength is delta = 1.

Coordinate problem: observe the first of two independent unit-variance
coordinates with unit noise. Only one direction is informed.
"""

import numpy as np

from lowrank_bip import (
    SpectralLossFn,
    bayes_spectrum,
    joint_approximation,
    optimal_covariance,
    optimal_mean_class1,
    optimal_mean_class2,
    predicted_loss,
    solve_posterior,
    variance_reduction,
)
from lowrank_bip.oracle import bayes_risk_exact
from lowrank_bip.problems import coordinate_problem, scalar_problem


def show_scalar():
    p = scalar_problem()
    sol = solve_posterior(p, [1.0])
    s = bayes_spectrum(p)
    print("scalar problem")
    print(f"  posterior mean for y = 1      {sol.posterior.mean[0]:.6f}")
    print(f"  posterior variance            {sol.posterior.covariance.matrix[0, 0]:.6f}")
    print(f"  lambda, delta                 {s.lambdas[0]:+.6f}, {s.deltas[0]:.6f}")
    print(f"  variance reduction ratio      {variance_reduction(s, 1):.6f}")
    for f in (SpectralLossFn.kl(), SpectralLossFn.reverse_kl(), SpectralLossFn.renyi(0.5)):
        print(f"  rank-0 loss {f.label:<12s}      {predicted_loss(s, 0, 'cov', f):.6f}")
    A = optimal_mean_class2(s, 1)
    print(f"  rank-1 mean operator          {A.matrix[0, 0]:.6f}")
    print(f"  Bayes risk of A = 0           {bayes_risk_exact(np.zeros((1, 1)), p, s).value:.6f}")


def show_coordinate():
    p = coordinate_problem()
    s = bayes_spectrum(p)
    print("coordinate problem")
    print(f"  lambdas                       {s.lambdas}")
    print(f"  rank of the data misfit       {s.rank_h}")
    C1 = optimal_covariance(s, 1)
    print(f"  rank-1 covariance             {C1.assemble().tolist()}")
    print(f"  rank-1 class-1 mean operator  {optimal_mean_class1(s, 1).matrix.ravel().tolist()}")
    mean, cov = joint_approximation(s, 1, "class2")
    print(f"  joint rank-1 mean operator    {mean.matrix.ravel().tolist()}")
    print(f"  joint rank-1 covariance factor {cov.factor.ravel().tolist()}")
    print(f"  predicted joint loss at r = 0 {predicted_loss(s, 0, 'joint2'):.6f}")
    print(f"  predicted joint loss at r = 1 {predicted_loss(s, 1, 'joint2'):.6f}")


if __name__ == "__main__":
    show_scalar()
    print()
    show_coordinate()
