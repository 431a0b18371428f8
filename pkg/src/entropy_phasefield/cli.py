"""Command line front end.

    python -m entropy_phasefield run --config exp.ini --out runs/a
    python -m entropy_phasefield study-tau --config exp.ini --ladder 0.004,0.002,0.001 --out runs/s
    python -m entropy_phasefield study-eps --scenario double_obstacle --ladder 1e-2,5e-3,2.5e-3 --out runs/e
    python -m entropy_phasefield check runs/a/checkpoint.entc

Exit codes: 0 success, 2 config error, 3 step failure, 4 verification
failure, 5 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from .config import parse_config, serialize_config
from .diagnostics import StudyError, eps_study, ledger_csv, tau_study, verify_trajectory
from .grid import write_field
from .scenarios import scenario, scenario_names
from .scheme import CheckpointError, ConfigError, RunFailure, checkpoint_load, checkpoint_save, run

EXIT_OK, EXIT_CONFIG, EXIT_STEP, EXIT_VERIFY, EXIT_IO = 0, 2, 3, 4, 5

log = logging.getLogger("entropy_phasefield")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _load_config(args):
    if args.config and args.scenario:
        raise ConfigError("give either --config or --scenario, not both")
    if args.config:
        return parse_config(args.config)
    if args.scenario:
        try:
            cfg = scenario(args.scenario)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        cfg.validate()
        return cfg
    raise ConfigError("no configuration given (use --config or --scenario)")


def _write_manifest(out: Path, manifest: dict) -> None:
    # write-then-rename so readers never see a half-written manifest
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, out / "manifest.json")


def _prepare_out(out: Path, cfg, command: str) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(serialize_config(cfg), encoding="utf-8")
    manifest = {
        "command": command,
        "status": "running",
        "output_dir": str(out),
        "config": serialize_config(cfg),
        "artifacts": ["config.ini"],
    }
    _write_manifest(out, manifest)
    return manifest


def snapshot_every_default(N: int) -> int:
    return max(1, N // 50)


def _emit_run(out: Path, traj, every: int, manifest: dict) -> None:
    snap = out / "snapshots"
    snap.mkdir(exist_ok=True)
    last = len(traj.steps)
    for i in range(0, last + 1):
        if i % every and i != last:
            continue
        for name in ("theta", "chi"):
            rel = f"snapshots/{name}_{i:06d}.entf"
            write_field(out / rel, traj.state(i, name))
            manifest["artifacts"].append(rel)
    (out / "ledger.csv").write_text(ledger_csv(traj.ledger), encoding="utf-8")
    checkpoint_save(traj, out / "checkpoint.entc")
    manifest["artifacts"] += ["ledger.csv", "checkpoint.entc"]


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        manifest = _prepare_out(out, cfg, "run")
    except OSError as exc:
        _err(f"cannot write to {out}: {exc}")
        return EXIT_IO
    every = args.snapshot_every or snapshot_every_default(cfg.N)
    code = EXIT_OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            traj = run(cfg)
        except RunFailure as exc:
            _err(str(exc))
            for k, v in exc.context.items():
                print(f"  {k} = {v!r}", file=sys.stderr)
            traj = exc.trajectory
            manifest["failure"] = {"step": exc.step, "message": str(exc), "context": {k: repr(v) for k, v in exc.context.items()}}
            code = EXIT_STEP
    manifest["warnings"] = [str(w.message) for w in caught]
    for w in manifest["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    try:
        _emit_run(out, traj, every, manifest)
        manifest["status"] = "complete" if code == EXIT_OK else "failed"
        manifest["steps"] = len(traj.steps)
        _write_manifest(out, manifest)
    except OSError as exc:
        _err(f"writing results failed: {exc}")
        return EXIT_IO
    if code == EXIT_OK:
        print(f"{len(traj.steps)} steps written to {out}")
    return code


def cmd_study(args, kind: str) -> int:
    try:
        cfg = _load_config(args)
        if not args.ladder:
            raise ConfigError("--ladder is required for a study")
        try:
            ladder = [float(v) for v in args.ladder.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"cannot parse ladder {args.ladder!r}") from None
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        manifest = _prepare_out(out, cfg, f"study-{kind}")
    except OSError as exc:
        _err(f"cannot write to {out}: {exc}")
        return EXIT_IO
    jobs = args.jobs or os.cpu_count() or 1
    study = tau_study if kind == "tau" else eps_study
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = study(cfg, ladder, jobs=jobs)
    except (StudyError, ConfigError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except RunFailure as exc:
        _err(str(exc))
        return EXIT_STEP
    try:
        (out / "study.csv").write_text(report.to_csv(), encoding="utf-8")
        (out / "summary.txt").write_text(report.summary(), encoding="utf-8")
        manifest["artifacts"] += ["study.csv", "summary.txt"]
        manifest["status"] = "complete"
        _write_manifest(out, manifest)
    except OSError as exc:
        _err(f"writing results failed: {exc}")
        return EXIT_IO
    print(report.summary(), end="")
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        traj = checkpoint_load(args.checkpoint)
    except OSError as exc:
        _err(f"cannot read {args.checkpoint}: {exc}")
        return EXIT_IO
    except CheckpointError as exc:
        where = f" (step {exc.step})" if exc.step is not None else ""
        print(f"FAIL{where}: {exc}")
        return EXIT_VERIFY
    except ConfigError as exc:
        print(f"FAIL: stored config is invalid: {exc}")
        return EXIT_VERIFY
    bad = [r for r in verify_trajectory(traj) if not r["ok"]]
    for r in bad:
        print(f"FAIL step {r['step']}: " + "; ".join(r["messages"]))
    if bad:
        return EXIT_VERIFY
    print(f"PASS: {len(traj.steps)} steps verified")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entropy_phasefield", description="Entropy phase-field scheme runner")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value experiment file")
        sp.add_argument("--scenario", help=f"built-in scenario: {', '.join(scenario_names())}")
        sp.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("run", help="run the scheme and write ledger, snapshots and checkpoint")
    common(r)
    r.add_argument("--snapshot-every", type=int, default=None, help="snapshot cadence (default max(1, N/50))")
    for name in ("study-tau", "study-eps"):
        s = sub.add_parser(name, help=f"{name[6:]} refinement study")
        common(s)
        s.add_argument("--ladder", required=True, help="comma separated values, coarse to fine")
        s.add_argument("--jobs", type=int, default=None, help="parallel runs (default: CPU count)")
    c = sub.add_parser("check", help="re-verify a checkpoint from scratch")
    c.add_argument("checkpoint")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "run":
        if args.snapshot_every is not None and args.snapshot_every < 1:
            _err("--snapshot-every must be >= 1")
            return EXIT_CONFIG
        return cmd_run(args)
    if args.command == "study-tau":
        return cmd_study(args, "tau")
    if args.command == "study-eps":
        return cmd_study(args, "eps")
    return cmd_check(args)


if __name__ == "__main__":
    sys.exit(main())
