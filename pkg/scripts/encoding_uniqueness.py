"""Search for non-flat first-order-covariant Dirac encodings."""
import argparse

from lorentzlattice.analysis import encoding_uniqueness_search


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", default="2,1;3,2;2,3")
    ap.add_argument("--samples", type=int, default=4000)
    ap.add_argument("--min-distance", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for pair in args.pairs.split(";"):
        a, b = (int(x) for x in pair.split(","))
        res = encoding_uniqueness_search(a, b, n_samples=args.samples, min_distance=args.min_distance, seed=args.seed)
        print(
            f"({a},{b}) flat {res.flat.first_order_residual:.1e}  "
            f"best {res.best.first_order_residual:.1e} at d={res.best.distance:.1e}  "
            f"floor {res.floor:.4f} at d={res.floor_candidate.distance:.3f}  converged={res.converged}"
        )


if __name__ == "__main__":
    main()
