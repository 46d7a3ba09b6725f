"""Try to beat the closed-form covariance optimum by direct minimization.

For each rank, random restarts of a descent method minimize the spectral loss
over all factors U in the precision update C_pr^{-1} + U U^T. None of them
should end below the predicted optimum; the best ones land on it.
"""

import warnings

from lowrank_bip import SpectralLossFn, bayes_spectrum, brute_force_cov_opt, predicted_loss
from lowrank_bip.problems import random_problem


def main(seed=17, restarts=10):
    p = random_problem(seed, n=3, d=5)
    s = bayes_spectrum(p)
    print(f"n = {p.n}, d = {p.d}, informed directions = {s.rank_h}")
    print(f"{'loss':>12s} {'r':>3s} {'predicted':>12s} {'brute force':>12s} {'gap':>10s} {'iters':>6s}")
    for f in (SpectralLossFn.kl(), SpectralLossFn.reverse_kl(), SpectralLossFn.renyi(0.5)):
        for r in range(1, s.rank_h + 1):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = brute_force_cov_opt(p, r, f, restarts=restarts, seed=seed)
            pred = predicted_loss(s, r, "cov", f)
            print(f"{f.label:>12s} {r:3d} {pred:12.6e} {res.loss:12.6e} {res.loss - pred:10.2e} {res.iterations:6d}")


if __name__ == "__main__":
    main()
