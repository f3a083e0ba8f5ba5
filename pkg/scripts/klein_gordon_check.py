"""Second-order stencil residual of Clock QW components, plus the predicted continuum mass."""
import argparse

import numpy as np

from lorentzlattice.analysis import kg_decoupling_residual, kg_mass_check
from lorentzlattice.lattice import InitialRow
from lorentzlattice.models import ClockWalkSpec, clock_coin, dirac_matrix, qw_evolve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--max-period", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    coin = dirac_matrix(args.m, args.eps)
    print(f"{'p':>2} {'q':>2}  {'stencil':>9}  {'m/sqrt(pq)':>10}")
    for p in range(1, args.max_period + 1):
        for q in range(1, args.max_period + 1):
            f = qw_evolve(InitialRow.random(4, (p, q), rng), clock_coin(p, q, coin), args.steps)
            res = kg_decoupling_residual(f, ClockWalkSpec(p, q, coin))
            mass = kg_mass_check(p, q, args.m)
            print(f"{p:>2} {q:>2}  {res:9.1e}  {mass.predicted_mass:10.6f}")


if __name__ == "__main__":
    main()
