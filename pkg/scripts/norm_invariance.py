"""Surface norms of random Dirac walks over swap-deformed and boosted surfaces."""
import argparse

import numpy as np

from lorentzlattice.lattice import InitialRow
from lorentzlattice.lorentz import LorentzParams, lorentz_transform_field
from lorentzlattice.models import dirac_coin, qw_evolve
from lorentzlattice.observables import constant_time_surface, random_swaps, surface_norm, transform_surface


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sites", type=int, default=64)
    ap.add_argument("--solutions", type=int, default=5)
    ap.add_argument("--surfaces", type=int, default=10)
    ap.add_argument("--swaps", type=int, default=10)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    gate = dirac_coin(args.m, 0.1)
    steps = 2 * args.swaps + 4
    span = args.sites + 2 * steps + 4
    base = constant_time_surface(0, -span, span)
    for k in range(args.solutions):
        f = qw_evolve(InitialRow.random(args.sites, 1, rng, r_start=-(args.sites // 2)), gate, steps)
        ref = surface_norm(f, base).value
        gaps = []
        for _ in range(args.surfaces):
            s = random_swaps(constant_time_surface(steps // 2, -span, span), args.swaps, rng, span=args.swaps)
            gaps.append(abs(surface_norm(f, s).value - ref))
        boosted = []
        for a, b in [(2, 1), (1, 3), (3, 2)]:
            fp = lorentz_transform_field(f, gate, LorentzParams(a, b, "dirac"))
            boosted.append(abs(surface_norm(fp, transform_surface(base, a, b)).value - ref))
        print(f"solution {k}: norm {ref:.15f}  swap gap {max(gaps):.1e}  boosted gap {max(boosted):.1e}")


if __name__ == "__main__":
    main()
