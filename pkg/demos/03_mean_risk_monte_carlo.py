"""Compare the two low-rank mean classes and check their risks by simulation.

Class 1 reuses the optimal low-rank covariance inside the posterior-mean
formula; class 2 is the best rank-r matrix with no structural constraint.
Class 1 wins whenever every neglected delta is below 1, because delta^3 is
then smaller than delta.
"""

import numpy as np

from lowrank_bip import bayes_spectrum, optimal_mean_class1, optimal_mean_class2, predicted_loss
from lowrank_bip.oracle import bayes_risk_exact, bayes_risk_mc
from lowrank_bip.problems import random_problem


def main(seed=5, samples=50_000):
    p = random_problem(seed, n=4, d=6)
    s = bayes_spectrum(p)
    print("deltas:", np.array2string(s.deltas, precision=4))
    print(f"{'r':>3s} {'class':>6s} {'predicted':>12s} {'exact':>12s} {'monte carlo':>24s}")
    for r in range(0, min(p.n, p.d) + 1):
        for A, target in ((optimal_mean_class1(s, r), "mean1"), (optimal_mean_class2(s, r), "mean2")):
            exact = bayes_risk_exact(A, p, s).value
            mc = bayes_risk_mc(A, p, samples, seed + r)
            print(
                f"{r:3d} {A.klass[-1]:>6s} {predicted_loss(s, r, target):12.5e} {exact:12.5e}"
                f" {mc.value:12.5e} +- {mc.stderr:8.2e}"
            )


if __name__ == "__main__":
    main()
