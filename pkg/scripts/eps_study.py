"""Singular-limit study: halve eps on the double-obstacle scenario at fixed tau.

Prints the obstacle violation, its halving ratio and min theta per member,
then the Cauchy-difference summary.

    python scripts/eps_study.py [--levels 11] [--jobs 1] [--csv study.csv]
"""
import argparse
import warnings

from entropy_phasefield.diagnostics import eps_study
from entropy_phasefield.scenarios import scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=11)
    ap.add_argument("--eps0", type=float, default=1e-2)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--csv")
    args = ap.parse_args()
    epss = [args.eps0 * 2.0**-k for k in range(args.levels)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = eps_study(scenario("double_obstacle", n=args.n), epss, jobs=args.jobs)
    print(f"{'eps':>10} {'violation':>11} {'ratio':>7} {'min theta':>10}")
    prev = None
    for e, v, m in zip(epss, rep.obstacle, rep.min_theta):
        ratio = "" if prev is None else f"{v / prev:7.3f}"
        print(f"{e:10.3e} {v:11.3e} {ratio:>7} {m:10.4f}")
        prev = v
    print(rep.summary(), end="")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(rep.to_csv())


if __name__ == "__main__":
    main()
