"""Time discretization: source averaging, the step loop, interpolants and checkpoints.

A run advances i = 1..N with tau = T/N. Each step builds

    g = tau F^i + tau^(1/2) Theta^(i-1) + log^(i-1) + ell chi^(i-1),   h = chi^(i-1)

and hands it to the stepper. ``log^(i-1)`` is exact ln(theta0) for the first
step. Afterwards it is ln_eps(Theta) at the working eps (fixed policy) or the
exact log of the final-rung Theta clipped at machine tiny (ladder policy).
"""
from __future__ import annotations

import io
import logging
import struct
import warnings
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import FIELD_HEADER, GridSpec, pack_field, unpack_field
from .monotone import (
    NonlocalOp,
    PiFunction,
    ScalarGraph,
    initial_selection,
    log_yosida,
)
from .stepper import (
    StepFailure,
    StepInputs,
    StepParams,
    contraction_bound,
    epsilon_ladder_step,
    fixed_point_step,
)

log = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "SourceError",
    "RunFailure",
    "CheckpointError",
    "SourceSpec",
    "EpsPolicy",
    "SchemeConfig",
    "StepRecord",
    "Trajectory",
    "evaluate_field",
    "discretize_source",
    "source_window_linf",
    "assemble_step_inputs",
    "run",
    "interp_const",
    "interp_lin",
    "checkpoint_save",
    "checkpoint_load",
]

TINY = np.finfo(float).tiny


class ConfigError(ValueError):
    pass


class SourceError(ValueError):
    pass


class CheckpointError(ValueError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class RunFailure(RuntimeError):
    """A step failed; ``trajectory`` holds everything accepted before it."""

    def __init__(self, message: str, step: int, trajectory: "Trajectory", context: dict | None = None):
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.trajectory = trajectory
        self.context = context or {}


# ----------------------------------------------------------------------------
# field expressions
# ----------------------------------------------------------------------------

_NAMESPACE = {
    name: getattr(np, name)
    for name in (
        "sin", "cos", "tan", "exp", "log", "sqrt", "tanh", "cosh", "sinh", "arctan",
        "abs", "minimum", "maximum", "where", "clip", "pi", "heaviside", "sign",
    )
}


def evaluate_field(spec, grid: GridSpec, t: float | None = None) -> np.ndarray:
    """Sample a field spec on the grid centres.

    ``spec`` is a number, an array of the grid shape, or an expression in
    x, y, z (and t when given) using common numpy functions.
    """
    if isinstance(spec, np.ndarray):
        grid.check(spec)
        return np.array(spec, dtype=float)
    if isinstance(spec, (int, float)):
        return grid.full(float(spec))
    coords = grid.centers()
    names = dict(_NAMESPACE)
    for name, c in zip("xyz", coords):
        names[name] = c
    if t is not None:
        names["t"] = float(t)
    try:
        with np.errstate(all="ignore"):  # non-finite output is reported below
            value = eval(compile(str(spec), "<field>", "eval"), {"__builtins__": {}}, names)
    except Exception as exc:
        raise ConfigError(f"cannot evaluate field expression {spec!r}: {exc}") from None
    out = np.broadcast_to(np.asarray(value, dtype=float), grid.shape).copy()
    if not np.all(np.isfinite(out)):
        raise ConfigError(f"field expression {spec!r} is not finite on the grid")
    return out


# ----------------------------------------------------------------------------
# sources
# ----------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class SourceSpec:
    """F(x, t) in one of four closed forms.

    constant: F = shape(x)
    poly:     F = (sum_k coeffs[k] t^k) * shape(x)
    expr:     F = expr(x, y, z, t)
    table:    piecewise linear in t through table[j] at times[j]
    """

    kind: str = "constant"
    shape: str = "0"
    coeffs: tuple[float, ...] = ()
    expr: str = ""
    times: tuple[float, ...] = ()
    table: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "times", tuple(float(c) for c in self.times))
        object.__setattr__(self, "table", tuple(str(c) for c in self.table))
        if self.kind not in ("constant", "poly", "expr", "table"):
            raise ConfigError(f"unknown source kind {self.kind!r}")
        if self.kind == "expr" and not self.expr:
            raise ConfigError("expr source needs an expression")
        if self.kind == "table":
            if len(self.times) < 2 or len(self.times) != len(self.table):
                raise ConfigError("table source needs >= 2 times with one field each")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise ConfigError("table source times must be strictly increasing")

    def evaluate(self, grid: GridSpec, t: float) -> np.ndarray:
        if self.kind == "constant":
            return evaluate_field(self.shape, grid)
        if self.kind == "poly":
            return np.polynomial.polynomial.polyval(t, self.coeffs or (0.0,)) * evaluate_field(self.shape, grid)
        if self.kind == "expr":
            return evaluate_field(self.expr, grid, t)
        ts = self.times
        if not ts[0] <= t <= ts[-1]:
            raise SourceError(f"tabulated source does not cover t = {t!r}")
        j = min(int(np.searchsorted(ts, t, side="right")) - 1, len(ts) - 2)
        w = (t - ts[j]) / (ts[j + 1] - ts[j])
        return (1 - w) * evaluate_field(self.table[j], grid) + w * evaluate_field(self.table[j + 1], grid)


def _gauss(fn, a: float, b: float):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return sum(w * fn(mid + half * x) for x, w in zip(_GL_NODES, _GL_WEIGHTS)) * half


def discretize_source(source: SourceSpec, grid: GridSpec, tau: float, i: int) -> np.ndarray:
    """F^i = (1/tau) * integral of F over ((i-1) tau, i tau)."""
    if i < 1:
        raise ValueError("steps are numbered from 1")
    a, b = (i - 1) * tau, i * tau
    if source.kind == "constant":
        return evaluate_field(source.shape, grid)
    if source.kind == "poly":
        mean = sum(c * (b ** (k + 1) - a ** (k + 1)) / (k + 1) for k, c in enumerate(source.coeffs)) / tau
        return mean * evaluate_field(source.shape, grid)
    if source.kind == "expr":
        return _gauss(lambda t: source.evaluate(grid, t), a, b) / tau
    ts = source.times
    # small slack so windows ending at T survive rounding of i*tau
    slack = 1e-12 * max(1.0, abs(b))
    if a < ts[0] - slack or b > ts[-1] + slack:
        raise SourceError(f"tabulated source covers [{ts[0]}, {ts[-1]}] but window {i} is [{a}, {b}]")
    a, b = max(a, ts[0]), min(b, ts[-1])
    cuts = [a] + [t for t in ts if a < t < b] + [b]
    total = grid.zeros()
    for lo, hi in zip(cuts, cuts[1:]):
        total = total + _gauss(lambda t: source.evaluate(grid, t), lo, hi)
    return total / tau


def source_window_linf(source: SourceSpec, grid: GridSpec, tau: float, i: int) -> float:
    """Approximate integral of ||F(s)||_inf over window i (Gauss points)."""
    a, b = (i - 1) * tau, i * tau
    if source.kind == "table":
        a, b = max(a, source.times[0]), min(b, source.times[-1])
    return float(_gauss(lambda t: np.max(np.abs(source.evaluate(grid, t))), a, b))


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class EpsPolicy:
    """Either one working eps for every step, or a per-step continuation ladder."""

    kind: str = "ladder"
    eps: float = 1e-5
    eps0: float = 1e-1
    factor: float = 0.5
    eps_min: float = 1e-5

    def __post_init__(self):
        if self.kind not in ("fixed", "ladder"):
            raise ConfigError(f"unknown eps policy {self.kind!r}")

    @property
    def working_eps(self) -> float:
        return self.eps if self.kind == "fixed" else self.eps_min

    def ladder(self) -> list[float]:
        if self.kind == "fixed":
            return [self.eps]
        if not 0 < self.factor < 1:
            raise ConfigError("eps ladder factor must lie in (0, 1)")
        if not 0 < self.eps_min <= self.eps0:
            raise ConfigError("eps ladder needs 0 < eps_min <= eps0")
        rungs = []
        e = self.eps0
        while e > self.eps_min * (1 + 1e-12):
            rungs.append(e)
            e *= self.factor
        rungs.append(self.eps_min)
        return rungs


@dataclass(frozen=True)
class SchemeConfig:
    T: float = 0.1
    N: int = 100
    grid: GridSpec = field(default_factory=lambda: GridSpec((1.0,), (64,)))
    k0: float = 1.0
    ell: float = 1.0
    graph_beta: ScalarGraph = field(default_factory=ScalarGraph.zero)
    pi: PiFunction = field(default_factory=PiFunction)
    op_A: NonlocalOp = field(default_factory=NonlocalOp)
    theta_star: str = "1"
    theta0: str = "1"
    chi0: str = "0"
    source: SourceSpec = field(default_factory=SourceSpec)
    eps_policy: EpsPolicy = field(default_factory=EpsPolicy)
    outer_tol: float = 1e-8
    newton_tol: float = 1e-10
    cg_tol: float = 1e-12
    outer_maxit: int = 200
    newton_maxit: int = 60
    cg_maxit: int = 20000
    stabilize: bool = True

    def __post_init__(self):
        # field specs are kept as text so configs serialize exactly
        for name in ("theta_star", "theta0", "chi0"):
            v = getattr(self, name)
            if isinstance(v, (int, float)):
                object.__setattr__(self, name, repr(float(v)))

    @property
    def tau(self) -> float:
        return self.T / self.N

    def step_params(self, eps: float | None = None) -> StepParams:
        return StepParams(
            tau=self.tau,
            eps=self.eps_policy.working_eps if eps is None else eps,
            k0=self.k0,
            ell=self.ell,
            outer_tol=self.outer_tol,
            newton_tol=self.newton_tol,
            cg_tol=self.cg_tol,
            outer_maxit=self.outer_maxit,
            newton_maxit=self.newton_maxit,
            cg_maxit=self.cg_maxit,
            stabilize=self.stabilize,
        )

    def with_(self, **changes) -> "SchemeConfig":
        return replace(self, **changes)

    def validate(self) -> list[str]:
        """Raise ConfigError listing every violated condition; return warnings."""
        problems: list[str] = []
        notes: list[str] = []
        if not (self.T > 0 and np.isfinite(self.T)):
            problems.append(f"final time T must be positive (T = {self.T!r})")
        if int(self.N) != self.N or self.N < 1:
            problems.append(f"step count N must be a positive integer (N = {self.N!r})")
        if problems:
            raise ConfigError("; ".join(problems))
        if self.graph_beta.kind == "log":
            problems.append("beta must be a box, power or zero graph, not log")
        elif not self.graph_beta.zero_in_graph_at_zero:
            problems.append("beta must satisfy 0 in beta(0) (box needs lo <= 0 <= hi)")
        for eps in self.eps_policy.ladder():
            for msg in self.step_params(eps).violations(self.pi, self.T):
                if msg not in problems:
                    problems.append(msg)
        g = self.grid
        fields = {}
        for name in ("theta0", "theta_star", "chi0"):
            try:
                fields[name] = evaluate_field(getattr(self, name), g)
            except ConfigError as exc:
                problems.append(str(exc))
        if "theta0" in fields and not np.all(fields["theta0"] > 0):
            problems.append(f"theta0 > 0 everywhere in Omega is violated (min theta0 = {fields['theta0'].min()!r})")
        if "theta_star" in fields and not np.all(fields["theta_star"] > 0):
            problems.append(f"theta_star > 0 everywhere in Omega is violated (min = {fields['theta_star'].min()!r})")
        if "chi0" in fields and not np.all(self.graph_beta.in_domain(fields["chi0"])):
            problems.append(f"chi0 must lie in D(beta) everywhere ({self.graph_beta.describe()})")
        if problems:
            raise ConfigError("; ".join(problems))
        try:
            worst = max(source_window_linf(self.source, g, self.tau, i) for i in range(1, self.N + 1))
        except SourceError as exc:
            raise ConfigError(str(exc)) from None
        if worst > 0.25:
            notes.append(
                f"source smallness per window (integral of ||F||_inf <= 1/4) fails: max window value {worst:.4g}"
            )
        return notes


# ----------------------------------------------------------------------------
# trajectory
# ----------------------------------------------------------------------------


@dataclass
class StepRecord:
    i: int
    t: float
    eps: float
    theta: np.ndarray
    chi: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    log_theta: np.ndarray  # ln_eps(Theta^i) at the step's final eps
    source: np.ndarray  # F^i
    outer_iters: int = 0
    newton_iters: int = 0
    cg_iters: int = 0
    residual_theta: float = 0.0
    residual_chi: float = 0.0
    max_ratio: float = 0.0
    ladder_differences: tuple[float, ...] = ()


@dataclass
class Trajectory:
    config: SchemeConfig
    theta0: np.ndarray
    chi0: np.ndarray
    theta_star: np.ndarray
    xi0: np.ndarray
    steps: list[StepRecord] = field(default_factory=list)
    ledger: list[dict] = field(default_factory=list)

    @property
    def tau(self) -> float:
        return self.config.tau

    @property
    def complete(self) -> bool:
        return len(self.steps) == self.config.N

    def times(self) -> np.ndarray:
        return np.array([0.0] + [s.t for s in self.steps])

    def state(self, i: int, name: str) -> np.ndarray:
        """Node value z^i of theta, chi or log (index 0 is initial data)."""
        if name == "log":
            return self.carried_log(i)
        if i == 0:
            return {"theta": self.theta0, "chi": self.chi0, "xi": self.xi0}[name]
        return getattr(self.steps[i - 1], name)

    def nodes(self, name: str) -> list[np.ndarray]:
        return [self.state(i, name) for i in range(len(self.steps) + 1)]

    def carried_log(self, i: int) -> np.ndarray:
        """The log term that step i+1 receives in g."""
        if i == 0:
            return np.log(self.theta0)
        if self.config.eps_policy.kind == "fixed":
            return self.steps[i - 1].log_theta
        return np.log(np.maximum(self.steps[i - 1].theta, TINY))


def _init_trajectory(config: SchemeConfig) -> Trajectory:
    g = config.grid
    theta0 = evaluate_field(config.theta0, g)
    chi0 = evaluate_field(config.chi0, g)
    return Trajectory(
        config=config,
        theta0=theta0,
        chi0=chi0,
        theta_star=evaluate_field(config.theta_star, g),
        xi0=np.asarray(initial_selection(config.graph_beta, chi0), dtype=float) * np.ones(g.shape),
    )


def assemble_step_inputs(traj: Trajectory, i: int) -> StepInputs:
    cfg = traj.config
    if not 1 <= i <= cfg.N:
        raise ValueError(f"step {i} outside 1..{cfg.N}")
    if i - 1 != len(traj.steps):
        raise ValueError(f"step {i} needs exactly {i - 1} accepted steps, have {len(traj.steps)}")
    if i == 1 and not np.all(traj.theta0 > 0):
        raise ConfigError("theta0 > 0 everywhere in Omega is violated")
    tau = cfg.tau
    s = np.sqrt(tau) if cfg.stabilize else 0.0
    F = discretize_source(cfg.source, cfg.grid, tau, i)
    theta_prev = traj.state(i - 1, "theta")
    chi_prev = traj.state(i - 1, "chi")
    g = tau * F + s * theta_prev + traj.carried_log(i - 1) + cfg.ell * chi_prev
    return StepInputs(
        grid=cfg.grid,
        g=g,
        h=chi_prev.copy(),
        theta_star=traj.theta_star,
        graph_beta=cfg.graph_beta,
        op_A=cfg.op_A,
        pi=cfg.pi,
    )


def run(
    config: SchemeConfig,
    resume_from: Trajectory | None = None,
    stop_after: int | None = None,
    outer_init: str = "previous",
    cold_ladder: bool = False,
) -> Trajectory:
    """Advance the scheme to step N (or ``stop_after``).

    outer_init: "previous" warm-starts each outer iteration at Theta^(i-1)
    (pointwise solve at step 1), "pointwise" always uses the pointwise solve.
    cold_ladder: under the ladder policy, solve directly at the final eps.
    """
    from .diagnostics import ledger_row

    if outer_init not in ("previous", "pointwise"):
        raise ValueError(f"unknown outer_init {outer_init!r}")
    for note in config.validate():
        warnings.warn(note, stacklevel=2)
    if resume_from is None:
        traj = _init_trajectory(config)
    else:
        if resume_from.config != config:
            raise ValueError("resume trajectory was produced by a different config")
        traj = Trajectory(
            config=config,
            theta0=resume_from.theta0,
            chi0=resume_from.chi0,
            theta_star=resume_from.theta_star,
            xi0=resume_from.xi0,
            steps=list(resume_from.steps),
            ledger=list(resume_from.ledger),
        )
    last = config.N if stop_after is None else min(config.N, stop_after)
    policy = config.eps_policy
    for i in range(len(traj.steps) + 1, last + 1):
        inputs = assemble_step_inputs(traj, i)
        theta_init = traj.state(i - 1, "theta") if (outer_init == "previous" and i > 1) else None
        params = config.step_params()
        try:
            if policy.kind == "ladder" and not cold_ladder:
                res = epsilon_ladder_step(inputs, params, policy.ladder(), theta_init=theta_init)
            else:
                res = fixed_point_step(inputs, params, theta_init=theta_init)
        except StepFailure as exc:
            raise RunFailure(str(exc), i, traj, getattr(exc, "context", {})) from exc
        limit = 10 * config.newton_tol
        if not (res.residual_theta <= limit and res.residual_chi <= limit):
            raise RunFailure(
                "step residuals exceed tolerance",
                i,
                traj,
                {"residual_theta": res.residual_theta, "residual_chi": res.residual_chi},
            )
        ln_eps, _ = log_yosida(res.eps, res.theta)
        rec = StepRecord(
            i=i,
            t=i * config.tau,
            eps=res.eps,
            theta=res.theta,
            chi=res.chi,
            zeta=res.zeta,
            xi=res.xi,
            log_theta=np.asarray(ln_eps, dtype=float),
            source=discretize_source(config.source, config.grid, config.tau, i),
            outer_iters=res.outer_iters,
            newton_iters=res.total_newton_iters,
            cg_iters=res.total_cg_iters,
            residual_theta=float(res.residual_theta),
            residual_chi=float(res.residual_chi),
            max_ratio=float(max(res.contraction_ratios, default=0.0)),
            ladder_differences=tuple(res.ladder_differences),
        )
        row = ledger_row(traj, rec)
        traj.steps.append(rec)
        traj.ledger.append(row)
        if row["theta_min"] <= 0:
            log.warning("step %d: min Theta = %g is not positive", i, row["theta_min"])
        if rec.max_ratio > contraction_bound(config.tau, config.ell):
            log.warning("step %d: outer ratio %g above the contraction bound", i, rec.max_ratio)
    return traj


# ----------------------------------------------------------------------------
# interpolants
# ----------------------------------------------------------------------------


def _locate(n_steps: int, tau: float, t: float) -> tuple[int, float]:
    """Return (i, s) with t = (i + s) tau, 0 <= i < n_steps, s in (0, 1]."""
    T = n_steps * tau
    if not -1e-12 * T <= t <= T * (1 + 1e-12):
        raise ValueError(f"t = {t!r} outside [0, {T!r}]")
    if t <= 0:
        return 0, 0.0
    i = min(int(np.ceil(t / tau)) - 1, n_steps - 1)
    i = max(i, 0)
    return i, t / tau - i


def interp_const(values, tau: float, t: float):
    """Piecewise-constant interpolant: z^(i+1) on (i tau, (i+1) tau], z^0 at t = 0.

    ``values`` is a Trajectory (returns a (theta, chi) pair) or a node sequence.
    """
    if isinstance(values, Trajectory):
        return interp_const(values.nodes("theta"), values.tau, t), interp_const(values.nodes("chi"), values.tau, t)
    i, s = _locate(len(values) - 1, tau, t)
    return values[i] if s == 0 else values[i + 1]


def interp_lin(values, tau: float, t: float):
    """Piecewise-linear interpolant through the nodes z^i at t = i tau."""
    if isinstance(values, Trajectory):
        return interp_lin(values.nodes("theta"), values.tau, t), interp_lin(values.nodes("chi"), values.tau, t)
    i, s = _locate(len(values) - 1, tau, t)
    if s == 0:
        return values[i]
    if s >= 1:
        return values[i + 1]
    return values[i] + s * (values[i + 1] - values[i])


# ----------------------------------------------------------------------------
# checkpoints
# ----------------------------------------------------------------------------

CHECKPOINT_MAGIC = b"ENTC"
CHECKPOINT_VERSION = 1
# magic, version, step count, config text length, crc32 of the config text
_HEAD = struct.Struct("<4sIIQI")
# tag, field count, crc32; block crcs cover the header fields before them and the snapshot bytes
_INIT = struct.Struct("<4sII")
# tag, step index, eps, field count, crc32
_STEP = struct.Struct("<4sIdII")
# tag, csv length, crc32
_LEDGER = struct.Struct("<4sQI")
_END = b"END!"
_INIT_FIELDS = ("theta0", "chi0", "theta_star", "xi0")
_STEP_FIELDS = ("theta", "chi", "zeta", "xi", "log_theta", "source")


def checkpoint_save(traj: Trajectory, path) -> None:
    from .config import serialize_config
    from .diagnostics import ledger_csv

    text = serialize_config(traj.config).encode("utf-8")
    out = io.BytesIO()
    out.write(_HEAD.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(traj.steps), len(text), zlib.crc32(text)))
    out.write(text)
    blob = b"".join(pack_field(getattr(traj, f)) for f in _INIT_FIELDS)
    out.write(_INIT.pack(b"INIT", len(_INIT_FIELDS), _block_crc(_INIT, blob, b"INIT", len(_INIT_FIELDS))))
    out.write(blob)
    for rec in traj.steps:
        blob = b"".join(pack_field(getattr(rec, f)) for f in _STEP_FIELDS)
        crc = _block_crc(_STEP, blob, b"STEP", rec.i, rec.eps, len(_STEP_FIELDS))
        out.write(_STEP.pack(b"STEP", rec.i, rec.eps, len(_STEP_FIELDS), crc))
        out.write(blob)
    csv = ledger_csv(traj.ledger).encode("utf-8")
    out.write(_LEDGER.pack(b"LDGR", len(csv), zlib.crc32(csv)))
    out.write(csv)
    out.write(_END)
    with open(path, "wb") as fh:
        fh.write(out.getvalue())


def _block_crc(st: struct.Struct, blob: bytes, *head) -> int:
    prefix = st.pack(*head, 0)[: st.size - 4]
    return zlib.crc32(blob, zlib.crc32(prefix))


def _take(buf: bytes, pos: int, st: struct.Struct, what: str):
    if len(buf) < pos + st.size:
        raise CheckpointError(f"checkpoint truncated in {what}")
    return st.unpack_from(buf, pos), pos + st.size


def _fields(buf: bytes, pos: int, count: int, crc: int, what: str, step: int | None, head: bytes):
    start = pos
    fields = []
    for _ in range(count):
        if len(buf) < pos + FIELD_HEADER.size:
            raise CheckpointError(f"checkpoint truncated in {what}", step)
        try:
            u, pos = unpack_field(buf, pos)
        except ValueError as exc:
            if "truncated" in str(exc):
                raise CheckpointError(f"checkpoint truncated in {what}", step) from None
            raise CheckpointError(f"corrupt snapshot in {what}: {exc}", step) from None
        fields.append(u)
    if zlib.crc32(buf[start:pos], zlib.crc32(head)) != crc:
        raise CheckpointError(f"checksum mismatch in {what}", step)
    return fields, pos


def checkpoint_load(path) -> Trajectory:
    from .config import parse_config_text
    from .diagnostics import parse_ledger_csv

    with open(path, "rb") as fh:
        buf = fh.read()
    (magic, version, n_steps, text_len, text_crc), pos = _take(buf, 0, _HEAD, "header")
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"not a checkpoint (magic {magic!r})")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if len(buf) < pos + text_len:
        raise CheckpointError("checkpoint truncated in config text")
    text = buf[pos : pos + text_len]
    if zlib.crc32(text) != text_crc:
        raise CheckpointError("checksum mismatch in config text")
    config = parse_config_text(text.decode("utf-8"))
    pos += text_len
    head = pos
    (tag, count, crc), pos = _take(buf, pos, _INIT, "initial block")
    if tag != b"INIT" or count != len(_INIT_FIELDS):
        raise CheckpointError("corrupt initial block")
    init, pos = _fields(buf, pos, count, crc, "initial data", 0, buf[head : pos - 4])
    traj = Trajectory(config, *init)
    for k in range(1, n_steps + 1):
        head = pos
        (tag, i, eps, count, crc), pos = _take(buf, pos, _STEP, f"step {k} header")
        if tag != b"STEP" or i != k or count != len(_STEP_FIELDS):
            raise CheckpointError(f"corrupt header for step {k}", k)
        vals, pos = _fields(buf, pos, count, crc, f"step {k}", k, buf[head : pos - 4])
        traj.steps.append(StepRecord(k, k * config.tau, eps, *vals))
    (tag, length, crc), pos = _take(buf, pos, _LEDGER, "ledger header")
    if tag != b"LDGR":
        raise CheckpointError("corrupt ledger block")
    if len(buf) < pos + length:
        raise CheckpointError("checkpoint truncated in ledger")
    csv = buf[pos : pos + length]
    if zlib.crc32(csv) != crc:
        raise CheckpointError("checksum mismatch in ledger")
    pos += length
    if buf[pos:] != _END:
        raise CheckpointError("checkpoint truncated or has trailing bytes after ledger")
    traj.ledger = parse_ledger_csv(csv.decode("utf-8"))
    if len(traj.ledger) != n_steps:
        raise CheckpointError("ledger row count does not match step count")
    for rec, row in zip(traj.steps, traj.ledger):
        if row["step"] != rec.i or row["t"] != rec.t:
            raise CheckpointError(f"ledger row does not match step {rec.i}", rec.i)
        rec.outer_iters = row["outer_iters"]
        rec.newton_iters = row["newton_iters"]
        rec.cg_iters = row["cg_iters"]
        rec.residual_theta = row["residual_theta"]
        rec.residual_chi = row["residual_chi"]
        rec.max_ratio = row["max_ratio"]
    return traj
