"""Bring a piecewise-inertial observer to rest with a non-homogeneous Clock-QCA stretch."""
import argparse

import numpy as np

from lorentzlattice.lattice import Window
from lorentzlattice.lorentz import GateNetwork, network_gluing_check, nonhomog_transform, observer_rescaling
from lorentzlattice.models import ONE, Q, ZERO, clock_qca_scattering, dirac_matrix


def parse_traj(text):
    return [tuple(int(x) for x in seg.split(",")) for seg in text.split(";")]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--traj", default="1,1;2,1", help="segments a,b;a,b (right steps, left steps)")
    ap.add_argument("--start", default="0,-1")
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    traj = parse_traj(args.traj)
    r0, l0 = (int(x) for x in args.start.split(","))
    nh = observer_rescaling(traj, start=(r0, l0))
    print("alpha_r:", nh.alpha_by_r)
    print("beta_l: ", nh.beta_by_l)

    n_r, n_l = sum(a for a, _ in traj), sum(b for _, b in traj)
    net = GateNetwork(Window(r0, l0, n_r, n_l), clock_qca_scattering(dirac_matrix(1.0, 0.4)))
    stretched = nonhomog_transform(net, nh)
    print(f"stretched grid {stretched.n_cols} x {stretched.n_rows}, patch residual {stretched.patch_residual:.1e}")

    rng = np.random.default_rng(args.seed)
    n_legs = n_r + n_l
    for k in range(args.trials):
        cfg = list(rng.choice([Q, ZERO], size=n_legs))
        cfg[int(rng.integers(n_legs))] = ONE
        gap = network_gluing_check(stretched, {tuple(int(x) for x in cfg): 1.0})
        print(f"trial {k}: gluing gap {gap:.1e}")


if __name__ == "__main__":
    main()
