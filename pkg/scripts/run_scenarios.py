"""Run every built-in scenario and print a one-line summary of its ledger.

    python scripts/run_scenarios.py [--out runs/scenarios]
"""
import argparse
import time
import warnings
from pathlib import Path

from entropy_phasefield.diagnostics import ledger_csv, verify_trajectory
from entropy_phasefield.scenarios import scenario, scenario_names
from entropy_phasefield.scheme import run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", help="write <scenario>.csv ledgers here")
    ap.add_argument("names", nargs="*", default=scenario_names())
    args = ap.parse_args()
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    print(f"{'scenario':18} {'steps':>5} {'time s':>7} {'min theta':>10} {'max defect':>11} {'max resid':>10} {'viol':>9} verify")
    for name in args.names:
        cfg = scenario(name)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            traj = run(cfg)
        dt = time.perf_counter() - t0
        led = traj.ledger
        ok = all(r["ok"] for r in verify_trajectory(traj))
        print(
            f"{name:18} {len(led):5d} {dt:7.2f} {min(r['theta_min'] for r in led):10.4g} "
            f"{max(r['entropy_defect'] for r in led):11.2e} "
            f"{max(max(r['residual_theta'], r['residual_chi']) for r in led):10.2e} "
            f"{max(r['obstacle_violation'] for r in led):9.2e} {'ok' if ok else 'FAILED'}"
        )
        if out:
            (out / f"{name}.csv").write_text(ledger_csv(led), encoding="utf-8")


if __name__ == "__main__":
    main()
