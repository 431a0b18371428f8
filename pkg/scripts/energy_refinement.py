"""Boundedness of the energy-estimate quantities under tau halving.

Runs one scenario with T = 1 at tau = 1/50, 1/100, 1/200 and applies the
ratio test (fine <= 1.25 coarse + 0.1 scale) to every monitored quantity.

    python scripts/energy_refinement.py [--scenario local_sign] [--n 64]
"""
import argparse
import warnings

from entropy_phasefield.diagnostics import ENERGY_QUANTITIES, energy_monitor, energy_ratio_test
from entropy_phasefield.scenarios import scenario
from entropy_phasefield.scheme import run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="local_sign")
    ap.add_argument("--n", type=int, default=64)
    args = ap.parse_args()
    base = scenario(args.scenario, n=args.n).with_(T=1.0)
    reps = []
    for N in (50, 100, 200):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            reps.append(energy_monitor(run(base.with_(N=N))))
    print(f"{'quantity':28} {'tau=1/50':>11} {'tau=1/100':>11} {'tau=1/200':>11}  ratio test")
    tests = [energy_ratio_test(a, b) for a, b in zip(reps, reps[1:])]
    for q in ENERGY_QUANTITIES:
        vals = [r.final()[q] for r in reps]
        ok = all(t[q][0] for t in tests)
        print(f"{q:28} " + " ".join(f"{v:11.4e}" for v in vals) + f"  {'pass' if ok else 'FAIL'}")
    print(f"initial energy {reps[0].initial_energy:.4g}; implied growth rate "
          + ", ".join(f"{r.growth_rate:.3g}" for r in reps))


if __name__ == "__main__":
    main()
