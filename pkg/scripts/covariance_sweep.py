"""Covariance residual against eps for every model and a grid of (alpha, beta)."""
import argparse
import json

from lorentzlattice.analysis import order_fit
from lorentzlattice.lorentz import LorentzParams, covariance_residual
from lorentzlattice.models import build_gate

EPS = [1e-1, 1e-2, 1e-3, 1e-4]


def sweep(model, alpha, beta, m, p=1, q=1):
    lp = LorentzParams.for_model(model, alpha, beta)
    extra = {"p": p, "q": q} if model == "clock_qw" else {}
    res = [covariance_residual(build_gate(model, {"m": m, "eps": e, **extra}), lp) for e in EPS]
    return res, order_fit(res, EPS)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--max-scale", type=int, default=3)
    ap.add_argument("--json", help="also dump rows here")
    args = ap.parse_args()

    rows = []
    print(f"{'model':<10} {'a':>2} {'b':>2}  {'r(1e-1)':>9} {'r(1e-4)':>9}  status")
    for model in ("dirac", "clock_qw", "clock_qca"):
        for a in range(1, args.max_scale + 1):
            for b in range(1, args.max_scale + 1):
                if model == "clock_qca" and a + b > 5:
                    continue  # 3^(a+b) dense patches
                res, fit = sweep(model, a, b, args.m)
                rows.append({"model": model, "alpha": a, "beta": b, "residuals": res, "status": fit.status})
                print(f"{model:<10} {a:>2} {b:>2}  {res[0]:9.2e} {res[-1]:9.2e}  {fit.status}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
