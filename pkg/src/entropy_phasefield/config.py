"""Flat ``key = value`` experiment files with one section per concern.

Sections and keys (defaults in parentheses)::

    [scheme]          T (0.1), N (100), k0 (1.0), ell (1.0), stabilize (true),
                      theta0 ("1"), chi0 ("0"), theta_star ("1")
    [grid]            extent (1.0), cells (64); comma lists for 2D/3D
    [beta]            kind (zero | box | power), lo (0.0), hi (1.0), p (3)
    [pi]              p1 (0.0), p0 (0.0)
    [A]               kind (zero | sign_nonlocal | sign_local)
    [source]          kind (constant | poly | expr | table), shape ("0"),
                      coeffs (comma list), expr, times (comma list),
                      table (field expressions separated by ';')
    [eps]             policy (ladder | fixed), eps (1e-5), eps0 (0.1),
                      factor (0.5), eps_min (1e-5)
    [stepper]         outer_tol (1e-8), newton_tol (1e-10), cg_tol (1e-12),
                      outer_maxit (200), newton_maxit (60), cg_maxit (20000)

Field values are numbers or expressions in x, y, z. Lines starting with '#'
are comments. Floats are written with ``repr`` so a parse/serialize/parse
cycle reproduces every value exactly.
"""
from __future__ import annotations

import configparser

from .grid import GridSpec
from .monotone import NonlocalOp, PiFunction, ScalarGraph
from .scheme import ConfigError, EpsPolicy, SchemeConfig, SourceSpec

__all__ = ["parse_config", "parse_config_text", "serialize_config", "KEYS"]

KEYS = {
    "scheme": ("T", "N", "k0", "ell", "stabilize", "theta0", "chi0", "theta_star"),
    "grid": ("extent", "cells"),
    "beta": ("kind", "lo", "hi", "p"),
    "pi": ("p1", "p0"),
    "A": ("kind",),
    "source": ("kind", "shape", "coeffs", "expr", "times", "table"),
    "eps": ("policy", "eps", "eps0", "factor", "eps_min"),
    "stepper": ("outer_tol", "newton_tol", "cg_tol", "outer_maxit", "newton_maxit", "cg_maxit"),
}


def _line_of(text: str, section: str, key: str | None = None) -> int:
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return n
        elif key is not None and current == section and "=" in line:
            if line.split("=", 1)[0].strip() == key:
                return n
    return 0


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def parse_config_text(text: str) -> SchemeConfig:
    cp = configparser.RawConfigParser(comment_prefixes=("#",), inline_comment_prefixes=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: expected a [section] header") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"line {exc.lineno}: {exc.message.splitlines()[0]}") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"line {lineno}: cannot parse {line.strip()!r}") from None
    for section in cp.sections():
        if section not in KEYS:
            raise ConfigError(f"line {_line_of(text, section)}: unknown section [{section}]")
        for key in cp[section]:
            if key not in KEYS[section]:
                raise ConfigError(f"line {_line_of(text, section, key)}: unknown key {key!r} in [{section}]")

    def get(section, key, conv, default):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key).strip()
        try:
            return conv(raw)
        except ValueError as exc:
            raise ConfigError(f"line {_line_of(text, section, key)}: bad value for {section}.{key}: {exc}") from None

    d = SchemeConfig()
    extent = get("grid", "extent", _floats, d.grid.extent)
    cells = get("grid", "cells", lambda s: tuple(int(v) for v in s.split(",")), d.grid.cells)
    if len(extent) == 1 and len(cells) > 1:
        extent = extent * len(cells)
    if len(cells) == 1 and len(extent) > 1:
        cells = cells * len(extent)
    try:
        grid = GridSpec(extent, cells)
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from None

    beta_kind = get("beta", "kind", str, "zero")
    if beta_kind == "box":
        beta = ScalarGraph.box(get("beta", "lo", float, 0.0), get("beta", "hi", float, 1.0))
    elif beta_kind == "power":
        p = get("beta", "p", int, 3)
        if p < 3 or p % 2 == 0:
            raise ConfigError(f"line {_line_of(text, 'beta', 'p')}: power exponent must be odd and >= 3")
        beta = ScalarGraph.power(p)
    elif beta_kind == "zero":
        beta = ScalarGraph.zero()
    else:
        raise ConfigError(f"line {_line_of(text, 'beta', 'kind')}: unknown beta kind {beta_kind!r}")

    a_kind = get("A", "kind", str, "zero")
    if a_kind not in ("zero", "sign_nonlocal", "sign_local"):
        raise ConfigError(f"line {_line_of(text, 'A', 'kind')}: unknown operator kind {a_kind!r}")

    src = SourceSpec(
        kind=get("source", "kind", str, "constant"),
        shape=get("source", "shape", str, "0"),
        coeffs=get("source", "coeffs", _floats, ()),
        expr=get("source", "expr", str, ""),
        times=get("source", "times", _floats, ()),
        table=get("source", "table", lambda s: tuple(v.strip() for v in s.split(";") if v.strip()), ()),
    )
    e = EpsPolicy()
    eps = EpsPolicy(
        kind=get("eps", "policy", str, e.kind),
        eps=get("eps", "eps", float, e.eps),
        eps0=get("eps", "eps0", float, e.eps0),
        factor=get("eps", "factor", float, e.factor),
        eps_min=get("eps", "eps_min", float, e.eps_min),
    )
    cfg = SchemeConfig(
        T=get("scheme", "T", float, d.T),
        N=get("scheme", "N", int, d.N),
        grid=grid,
        k0=get("scheme", "k0", float, d.k0),
        ell=get("scheme", "ell", float, d.ell),
        graph_beta=beta,
        pi=PiFunction(get("pi", "p1", float, 0.0), get("pi", "p0", float, 0.0)),
        op_A=NonlocalOp(a_kind),
        theta_star=get("scheme", "theta_star", str, d.theta_star),
        theta0=get("scheme", "theta0", str, d.theta0),
        chi0=get("scheme", "chi0", str, d.chi0),
        source=src,
        eps_policy=eps,
        outer_tol=get("stepper", "outer_tol", float, d.outer_tol),
        newton_tol=get("stepper", "newton_tol", float, d.newton_tol),
        cg_tol=get("stepper", "cg_tol", float, d.cg_tol),
        outer_maxit=get("stepper", "outer_maxit", int, d.outer_maxit),
        newton_maxit=get("stepper", "newton_maxit", int, d.newton_maxit),
        cg_maxit=get("stepper", "cg_maxit", int, d.cg_maxit),
        stabilize=get("scheme", "stabilize", _bool, d.stabilize),
    )
    cfg.validate()
    return cfg


def parse_config(path) -> SchemeConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 text ({exc})") from None
    return parse_config_text(text)


def serialize_config(cfg: SchemeConfig) -> str:
    def lst(xs):
        return ", ".join(repr(x) for x in xs)

    b = cfg.graph_beta
    s = cfg.source
    e = cfg.eps_policy
    sections = {
        "scheme": {
            "T": repr(float(cfg.T)),
            "N": str(int(cfg.N)),
            "k0": repr(float(cfg.k0)),
            "ell": repr(float(cfg.ell)),
            "stabilize": "true" if cfg.stabilize else "false",
            "theta0": str(cfg.theta0),
            "chi0": str(cfg.chi0),
            "theta_star": str(cfg.theta_star),
        },
        "grid": {"extent": lst(cfg.grid.extent), "cells": ", ".join(str(n) for n in cfg.grid.cells)},
        "beta": {"kind": b.kind, "lo": repr(b.lo), "hi": repr(b.hi), "p": str(b.p)},
        "pi": {"p1": repr(float(cfg.pi.p1)), "p0": repr(float(cfg.pi.p0))},
        "A": {"kind": cfg.op_A.kind},
        "source": {
            "kind": s.kind,
            "shape": s.shape,
            "coeffs": lst(s.coeffs),
            "expr": s.expr,
            "times": lst(s.times),
            "table": " ; ".join(s.table),
        },
        "eps": {
            "policy": e.kind,
            "eps": repr(e.eps),
            "eps0": repr(e.eps0),
            "factor": repr(e.factor),
            "eps_min": repr(e.eps_min),
        },
        "stepper": {
            "outer_tol": repr(cfg.outer_tol),
            "newton_tol": repr(cfg.newton_tol),
            "cg_tol": repr(cfg.cg_tol),
            "outer_maxit": str(cfg.outer_maxit),
            "newton_maxit": str(cfg.newton_maxit),
            "cg_maxit": str(cfg.cg_maxit),
        },
    }
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        for k, v in items.items():
            if name == "beta" and (k in ("lo", "hi") and b.kind != "box" or k == "p" and b.kind != "power"):
                continue
            lines.append(f"{k} = {v}" if v != "" else f"{k} =")
        lines.append("")
    return "\n".join(lines)
