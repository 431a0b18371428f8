"""Self-convergence in tau.

Three families:
  smooth    smooth_decoupled, chi order in C0(V) (backward Euler: about 1)
  singular  double_obstacle at a fixed working eps
  ladder    double_obstacle under the eps ladder; the carried exact log drifts
            from the solved ln_eps by O(eps_min) per step, so differences in
            ln theta grow like T eps_min / tau under refinement

    python scripts/tau_study.py [smooth singular ladder] [--jobs 1]
"""
import argparse
import time
import warnings

from entropy_phasefield.diagnostics import tau_study
from entropy_phasefield.scenarios import scenario
from entropy_phasefield.scheme import EpsPolicy

FAMILIES = {
    "smooth": (lambda: scenario("smooth_decoupled"), [0.004, 0.002, 0.001, 0.0005, 0.00025]),
    "singular": (lambda: scenario("double_obstacle").with_(eps_policy=EpsPolicy("fixed", eps=1e-5)), [0.004, 0.002, 0.001, 0.0005]),
    "ladder": (lambda: scenario("double_obstacle"), [0.004, 0.002, 0.001, 0.0005]),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("families", nargs="*", default=list(FAMILIES), choices=list(FAMILIES))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    for name in args.families:
        make, taus = FAMILIES[name]
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = tau_study(make(), taus, jobs=args.jobs)
        print(f"== {name} ({time.perf_counter() - t0:.1f} s)")
        print(rep.summary(), end="")
        for q, ds in rep.successive.items():
            print(f"  {q}: " + ", ".join(f"{d:.3e}" for d in ds))


if __name__ == "__main__":
    main()
