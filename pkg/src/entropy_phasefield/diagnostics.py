"""Ledger, conservation check, estimate monitors, lemma utilities and refinement studies."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import GridSpec
from .monotone import (
    graph_moreau,
    graph_yosida,
    log_yosida,
    nonlocal_yosida,
)

__all__ = [
    "LEDGER_COLUMNS",
    "ledger_row",
    "ledger_csv",
    "parse_ledger_csv",
    "entropy_defect",
    "step_entropy_defect",
    "gronwall_bound",
    "gronwall_extremal",
    "log_pair_inequality",
    "EnergyReport",
    "energy_monitor",
    "energy_ratio_test",
    "obstacle_violation",
    "interpolant_gaps",
    "verify_trajectory",
    "StudyReport",
    "tau_study",
    "eps_study",
    "StudyError",
]

LEDGER_COLUMNS = (
    "step",
    "t",
    "eps",
    "theta_min",
    "theta_max",
    "theta_norm_h",
    "theta_grad_sq",
    "theta_norm_l1",
    "chi_norm_v_sq",
    "beta_moreau",
    "zeta_norm_h",
    "xi_norm_h",
    "obstacle_violation",
    "entropy_defect",
    "cum_grad_theta_sq",
    "cum_chi_rate_sq",
    "outer_iters",
    "newton_iters",
    "cg_iters",
    "max_ratio",
    "residual_theta",
    "residual_chi",
    "positive",
)
_INT_COLUMNS = {"step", "outer_iters", "newton_iters", "cg_iters", "positive"}


class StudyError(ValueError):
    pass


# ----------------------------------------------------------------------------
# conservation
# ----------------------------------------------------------------------------


def entropy_defect(
    grid: GridSpec,
    theta,
    theta_prev,
    log_theta,
    log_prev,
    chi,
    chi_prev,
    zeta,
    source,
    tau: float,
    ell: float,
    stabilize: bool = True,
) -> float:
    """|integral of the entropy step equation tested with 1|.

    The diffusion term drops out exactly: the zero-flux stencil sums to zero.
    """
    s = math.sqrt(tau) if stabilize else 0.0
    integrand = (
        s * (theta - theta_prev)
        + (log_theta - log_prev)
        + ell * (chi - chi_prev)
        + tau * zeta
        - tau * source
    )
    return abs(grid.integral(integrand))


def step_entropy_defect(traj, i: int, rec=None) -> float:
    """Defect of step i of a trajectory (``rec`` overrides the stored step i)."""
    cfg = traj.config
    rec = traj.steps[i - 1] if rec is None else rec
    return entropy_defect(
        cfg.grid,
        rec.theta,
        traj.state(i - 1, "theta"),
        rec.log_theta,
        traj.carried_log(i - 1),
        rec.chi,
        traj.state(i - 1, "chi"),
        rec.zeta,
        rec.source,
        cfg.tau,
        cfg.ell,
        cfg.stabilize,
    )


# ----------------------------------------------------------------------------
# ledger
# ----------------------------------------------------------------------------


def _box_violation(beta, chi) -> float:
    if beta.kind != "box":
        return 0.0
    return float(max(0.0, np.max(beta.lo - chi), np.max(chi - beta.hi)))


def ledger_row(traj, rec) -> dict:
    """Ledger entry for ``rec``, the step following the last stored one."""
    cfg = traj.config
    g = cfg.grid
    i = rec.i
    prev_row = traj.ledger[-1] if traj.ledger else None
    chi_prev = traj.state(i - 1, "chi")
    grad = g.grad_sq(rec.theta)
    rate = g.norm_h((rec.chi - chi_prev) / cfg.tau) ** 2
    return {
        "step": i,
        "t": rec.t,
        "eps": float(rec.eps),
        "theta_min": float(np.min(rec.theta)),
        "theta_max": float(np.max(rec.theta)),
        "theta_norm_h": g.norm_h(rec.theta),
        "theta_grad_sq": grad,
        "theta_norm_l1": g.norm_l1(rec.theta),
        "chi_norm_v_sq": g.norm_v_sq(rec.chi),
        "beta_moreau": g.integral(np.asarray(graph_moreau(cfg.graph_beta, rec.eps, rec.chi)) * np.ones(g.shape)),
        "zeta_norm_h": g.norm_h(rec.zeta),
        "xi_norm_h": g.norm_h(rec.xi),
        "obstacle_violation": _box_violation(cfg.graph_beta, rec.chi),
        "entropy_defect": step_entropy_defect(traj, i, rec),
        "cum_grad_theta_sq": (prev_row["cum_grad_theta_sq"] if prev_row else 0.0) + cfg.tau * grad,
        "cum_chi_rate_sq": (prev_row["cum_chi_rate_sq"] if prev_row else 0.0) + cfg.tau * rate,
        "outer_iters": int(rec.outer_iters),
        "newton_iters": int(rec.newton_iters),
        "cg_iters": int(rec.cg_iters),
        "max_ratio": float(rec.max_ratio),
        "residual_theta": float(rec.residual_theta),
        "residual_chi": float(rec.residual_chi),
        "positive": int(np.min(rec.theta) > 0),
    }


def ledger_csv(rows: list[dict]) -> str:
    """Header plus one line per step; floats via repr so values reload exactly."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(LEDGER_COLUMNS)
    for row in rows:
        w.writerow([str(row[c]) if c in _INT_COLUMNS else repr(float(row[c])) for c in LEDGER_COLUMNS])
    return out.getvalue()


def parse_ledger_csv(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != LEDGER_COLUMNS:
        raise ValueError("ledger header does not match the expected columns")
    rows = []
    for rec in reader:
        if len(rec) != len(LEDGER_COLUMNS):
            raise ValueError(f"ledger row {len(rows) + 1} has {len(rec)} fields")
        rows.append({c: int(v) if c in _INT_COLUMNS else float(v) for c, v in zip(LEDGER_COLUMNS, rec)})
    return rows


# ----------------------------------------------------------------------------
# lemmas
# ----------------------------------------------------------------------------


def gronwall_bound(a0: float, b, m: int) -> float:
    """a0 * exp(b_1 + ... + b_(m-1)) with b = (b_1, ..., b_N)."""
    b = np.asarray(b, dtype=float)
    if a0 < 0 or np.any(b < 0):
        raise ValueError("Gronwall data must be nonnegative")
    if not 1 <= m <= len(b) + 1:
        raise ValueError(f"m = {m} outside 1..{len(b) + 1}")
    return float(a0 * math.exp(math.fsum(b[: m - 1])))


def gronwall_extremal(a0: float, b) -> np.ndarray:
    """The largest sequence allowed by a_m <= a0 + sum_{n<m} a_n b_n (equality)."""
    b = np.asarray(b, dtype=float)
    a = np.empty(len(b) + 1)
    a[0] = a0
    acc = 0.0
    for m in range(1, len(b) + 1):
        a[m] = a0 + acc
        acc += a[m] * b[m - 1]
    return a


def log_pair_inequality(a: float, b: float) -> tuple[float, float]:
    """(|a - b|, |ln a^2 - ln b^2| (a + b)); the first never exceeds the second.

    For a >= b this is (a - b) <= (ln a^2 - ln b^2)(a + b); the absolute
    values extend it to b > a, where the unsigned form would fail.
    """
    if not (a > 0 and b > 0):
        raise ValueError("log_pair_inequality needs a, b > 0")
    d = a - b
    # log1p keeps the log difference accurate for nearly equal arguments
    lg = 2.0 * abs(math.log1p(d / b)) if abs(d) < 0.5 * b else 2.0 * abs(math.log(a) - math.log(b))
    return abs(d), lg * (a + b)


# ----------------------------------------------------------------------------
# interpolants
# ----------------------------------------------------------------------------


def interpolant_gaps(values, tau: float, grid: GridSpec | None = None) -> dict:
    """Measured gaps between the constant and linear interpolants of a node sequence.

    Measurements go through the scheme's interpolants. On each interval the
    gap is (1 - s) times the jump, so the sup is read off at the midpoint and
    rescaled; the L2 gap uses 3-point Gauss quadrature, exact for the
    quadratic integrand. The closed forms are returned alongside.
    """
    from .scheme import interp_const, interp_lin

    vals = [np.asarray(v, dtype=float) for v in values]
    if grid is None:
        norm = lambda u: float(np.sqrt(np.sum(u * u)))  # noqa: E731
    else:
        norm = grid.norm_h
    n = len(vals) - 1
    jumps = [norm(vals[i + 1] - vals[i]) for i in range(n)]
    nodes, weights = np.polynomial.legendre.leggauss(3)
    l2 = 0.0
    sup = 0.0
    dt_sup = 0.0
    dt_l2 = 0.0
    for i in range(n):
        for x, w in zip(nodes, weights):
            t = (i + 0.5 * (1 + x)) * tau
            l2 += 0.5 * tau * w * norm(interp_const(vals, tau, t) - interp_lin(vals, tau, t)) ** 2
        mid = (i + 0.5) * tau
        sup = max(sup, 2.0 * norm(interp_const(vals, tau, mid) - interp_lin(vals, tau, mid)))
        slope = norm(interp_lin(vals, tau, (i + 1) * tau) - interp_lin(vals, tau, i * tau)) / tau
        dt_sup = max(dt_sup, slope)
        dt_l2 += tau * slope * slope
    return {
        "sup_gap": sup,
        "max_jump": max(jumps, default=0.0),
        "tau_dt_sup": tau * dt_sup,
        "l2_gap_sq": l2,
        "l2_closed": tau / 3.0 * math.fsum(j * j for j in jumps),
        "l2_dt": tau * tau / 3.0 * dt_l2,
        "sup_gap_sq": sup * sup,
        "jump_rate_sum": math.fsum(tau * tau * (j / tau) ** 2 for j in jumps),
        "tau_dt_l2": tau * dt_l2,
    }


# ----------------------------------------------------------------------------
# estimate monitors
# ----------------------------------------------------------------------------

ENERGY_QUANTITIES = (
    "sqrt_tau_max_theta_sq",
    "sqrt_tau_sum_theta_jump_sq",
    "max_theta_l1",
    "tau_sum_grad_theta_sq",
    "tau_sum_chi_rate_sq",
    "max_chi_v_sq",
    "sum_chi_jump_v_sq",
    "max_beta_moreau",
)


@dataclass
class EnergyReport:
    """Running values of the bounded quantities after each step n = 1..N."""

    series: dict[str, np.ndarray]
    grad_sq: np.ndarray  # per-step ||grad Theta^n||^2
    step_ok: np.ndarray  # every quantity finite and nonnegative
    initial_energy: float
    growth_rate: float  # smallest c with E_n <= E_0 exp(c t_n)
    scale: float

    def final(self) -> dict[str, float]:
        return {k: float(v[-1]) for k, v in self.series.items()}


def energy_monitor(traj) -> EnergyReport:
    cfg = traj.config
    g = cfg.grid
    tau = cfg.tau
    st = math.sqrt(tau)
    q = {k: [] for k in ENERGY_QUANTITIES}
    grads = []
    run = dict.fromkeys(ENERGY_QUANTITIES, 0.0)
    for i, rec in enumerate(traj.steps, 1):
        th_prev = traj.state(i - 1, "theta")
        x_prev = traj.state(i - 1, "chi")
        gs = g.grad_sq(rec.theta)
        grads.append(gs)
        run["sqrt_tau_max_theta_sq"] = max(run["sqrt_tau_max_theta_sq"], st * g.norm_h(rec.theta) ** 2)
        run["sqrt_tau_sum_theta_jump_sq"] += st * g.norm_h(rec.theta - th_prev) ** 2
        run["max_theta_l1"] = max(run["max_theta_l1"], g.norm_l1(rec.theta))
        run["tau_sum_grad_theta_sq"] += tau * gs
        run["tau_sum_chi_rate_sq"] += tau * g.norm_h((rec.chi - x_prev) / tau) ** 2
        run["max_chi_v_sq"] = max(run["max_chi_v_sq"], g.norm_v_sq(rec.chi))
        run["sum_chi_jump_v_sq"] += g.norm_v_sq(rec.chi - x_prev)
        mor = g.integral(np.asarray(graph_moreau(cfg.graph_beta, rec.eps, rec.chi)) * np.ones(g.shape))
        run["max_beta_moreau"] = max(run["max_beta_moreau"], mor)
        for k in ENERGY_QUANTITIES:
            q[k].append(run[k])
    series = {k: np.array(v) for k, v in q.items()}
    stacked = np.vstack([series[k] for k in ENERGY_QUANTITIES]) if traj.steps else np.zeros((len(q), 0))
    step_ok = np.all(np.isfinite(stacked) & (stacked >= 0), axis=0)
    e0 = (
        g.norm_l1(traj.theta0)
        + st * g.norm_h(traj.theta0) ** 2
        + g.norm_v_sq(traj.chi0)
        + g.integral(np.asarray(graph_moreau(cfg.graph_beta, 1.0, traj.chi0)) * np.ones(g.shape))
    )
    totals = stacked.sum(axis=0) if traj.steps else np.zeros(0)
    times = np.array([r.t for r in traj.steps])
    with np.errstate(divide="ignore"):
        rates = np.log(np.maximum(totals, 1e-300) / max(e0, 1e-300)) / times if len(times) else np.zeros(0)
    return EnergyReport(
        series=series,
        grad_sq=np.array(grads),
        step_ok=step_ok,
        initial_energy=e0,
        growth_rate=float(max(0.0, np.max(rates))) if len(rates) else 0.0,
        scale=1.0 + e0,
    )


def energy_ratio_test(coarse: EnergyReport, fine: EnergyReport, slack: float = 0.25, floor: float = 0.1) -> dict:
    """Quantity -> (passed, fine value, coarse value) for a tau-halving pair."""
    out = {}
    scale = max(coarse.scale, fine.scale)
    cf, ff = coarse.final(), fine.final()
    for k in ENERGY_QUANTITIES:
        out[k] = (ff[k] <= (1 + slack) * cf[k] + floor * scale, ff[k], cf[k])
    return out


# ----------------------------------------------------------------------------
# obstacle
# ----------------------------------------------------------------------------


def obstacle_violation(traj) -> tuple[float, dict[float, float]]:
    """Max distance of X from [lo, hi] over all steps, and the same per step eps."""
    beta = traj.config.graph_beta
    if beta.kind != "box":
        raise ValueError("obstacle violation is defined for the box graph only")
    table: dict[float, float] = {}
    for rec in traj.steps:
        v = _box_violation(beta, rec.chi)
        table[rec.eps] = max(table.get(rec.eps, 0.0), v)
    return max(table.values(), default=0.0), table


# ----------------------------------------------------------------------------
# independent verification
# ----------------------------------------------------------------------------


def verify_trajectory(traj, residual_tol: float | None = None, defect_tol: float | None = None) -> list[dict]:
    """Recompute every step's residuals and entropy defect from stored fields.

    Uses only the grid stencil and the monotone maps. Returns one dict per
    step with the measured values and an ``ok`` flag.
    """
    cfg = traj.config
    g = cfg.grid
    tau = cfg.tau
    s = math.sqrt(tau) if cfg.stabilize else 0.0
    rtol = 10 * cfg.newton_tol if residual_tol is None else residual_tol
    dtol = 100 * cfg.newton_tol * g.volume if defect_tol is None else defect_tol
    tiny = np.finfo(float).tiny
    out = []
    th_prev, x_prev, log_prev = traj.theta0, traj.chi0, np.log(traj.theta0)
    for k, rec in enumerate(traj.steps, 1):
        msgs = []
        eps = rec.eps
        gvec = tau * rec.source + s * th_prev + log_prev + cfg.ell * x_prev
        ln, _ = log_yosida(eps, rec.theta)
        ln = np.asarray(ln) * np.ones(g.shape)
        za = nonlocal_yosida(cfg.op_A, eps, rec.theta - traj.theta_star, g.dV)
        r1 = s * rec.theta + ln + tau * za - tau * cfg.k0 * g.laplacian(rec.theta) + cfg.ell * rec.chi - gvec
        b, _ = graph_yosida(cfg.graph_beta, eps, rec.chi)
        b = np.asarray(b) * np.ones(g.shape)
        r2 = rec.chi - tau * g.laplacian(rec.chi) + tau * b + tau * cfg.pi(rec.chi) - x_prev - tau * cfg.ell * rec.theta
        res1, res2 = g.norm_linf(r1), g.norm_linf(r2)
        defect = abs(g.integral(s * (rec.theta - th_prev) + ln - log_prev + cfg.ell * (rec.chi - x_prev) + tau * za - tau * rec.source))
        if not res1 <= rtol:
            msgs.append(f"entropy residual {res1:.3e} > {rtol:.1e}")
        if not res2 <= rtol:
            msgs.append(f"order-parameter residual {res2:.3e} > {rtol:.1e}")
        if not defect <= dtol:
            msgs.append(f"entropy defect {defect:.3e} > {dtol:.1e}")
        if not np.array_equal(za, rec.zeta):
            msgs.append("stored zeta differs from A_eps(Theta - theta_star)")
        if not np.array_equal(b, rec.xi):
            msgs.append("stored xi differs from beta_eps(X)")
        if not np.array_equal(ln, rec.log_theta):
            msgs.append("stored log differs from ln_eps(Theta)")
        if k <= len(traj.ledger):
            row = traj.ledger[k - 1]
            if row["step"] != k or not math.isclose(row["entropy_defect"], defect, rel_tol=1e-6, abs_tol=1e-13 * g.volume):
                msgs.append("ledger entropy defect does not match recomputation")
        out.append({"step": k, "residual_theta": res1, "residual_chi": res2, "defect": defect, "ok": not msgs, "messages": msgs})
        th_prev, x_prev = rec.theta, rec.chi
        log_prev = ln if cfg.eps_policy.kind == "fixed" else np.log(np.maximum(rec.theta, tiny))
    return out


# ----------------------------------------------------------------------------
# refinement studies
# ----------------------------------------------------------------------------

STUDY_QUANTITIES = ("log_theta_C0_Vprime", "chi_C0_V", "sqrt_theta_L2_H")


@dataclass
class StudyReport:
    kind: str  # "tau" or "eps"
    values: list[float]
    successive: dict[str, list[float]] = field(default_factory=dict)
    vs_reference: dict[str, list[float]] = field(default_factory=dict)
    orders: dict[str, float | None] = field(default_factory=dict)
    monotone: dict[str, bool] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    min_theta: list[float] = field(default_factory=list)
    obstacle: list[float | None] = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        cols = ["member", self.kind, "min_theta", "obstacle_violation"]
        for q in STUDY_QUANTITIES:
            cols += [f"{q}_successive", f"{q}_vs_reference"]
        w.writerow(cols)
        for k, v in enumerate(self.values):
            row = [k, repr(v), repr(self.min_theta[k]) if k < len(self.min_theta) else ""]
            ob = self.obstacle[k] if k < len(self.obstacle) else None
            row.append("" if ob is None else repr(ob))
            for q in STUDY_QUANTITIES:
                succ = self.successive.get(q, [])
                ref = self.vs_reference.get(q, [])
                row.append(repr(succ[k]) if k < len(succ) else "")
                row.append(repr(ref[k]) if k < len(ref) else "")
            w.writerow(row)
        return out.getvalue()

    def summary(self) -> str:
        lines = [f"{self.kind} study over {len(self.values)} members: {', '.join(repr(v) for v in self.values)}"]
        for q in STUDY_QUANTITIES:
            p = self.orders.get(q)
            order = "n/a" if p is None else f"{p:.3f}"
            mono = "decreasing" if self.monotone.get(q) else "not monotone"
            lines.append(f"  {q}: fitted order {order}; successive differences {mono}")
        for f in self.flags:
            lines.append(f"  note: {f}")
        return "\n".join(lines) + "\n"


def _fit_order(h: list[float], d: list[float]) -> float | None:
    pts = [(math.log(a), math.log(b)) for a, b in zip(h, d) if a > 0 and b > 0]
    if len(pts) < 2:
        return None
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


def _nodes(traj, stride: int) -> tuple[list, list, list]:
    """log, chi and theta at every ``stride``-th node."""
    idx = range(0, len(traj.steps) + 1, stride)
    return (
        [traj.carried_log(i) for i in idx],
        [traj.state(i, "chi") for i in idx],
        [traj.state(i, "theta") for i in idx],
    )


def _distance(a, b, sa: int, sb: int, cg_tol: float) -> dict[str, float]:
    """Distances between two runs on a common time partition.

    ``sa``/``sb`` map each fine interval of the common partition onto the
    step index of each run (nested ladders, so every coarse node is shared).
    """
    g = a.config.grid
    n_coarse = min(len(a.steps) // sa, len(b.steps) // sb)
    lv = cv = 0.0
    for j in range(n_coarse + 1):
        la, lb = a.carried_log(j * sa), b.carried_log(j * sb)
        lv = max(lv, g.dual_norm_vprime(la - lb, cg_tol=cg_tol))
        d = a.state(j * sa, "chi") - b.state(j * sb, "chi")
        cv = max(cv, math.sqrt(g.norm_v_sq(d)))
    # piecewise constant interpolants of theta^(1/2) on the finer partition
    fa, fb = len(a.steps), len(b.steps)
    fine = max(fa, fb)
    ra, rb = fine // fa, fine // fb
    dt = a.config.T / fine
    l2 = 0.0
    for k in range(fine):
        ta = np.sqrt(np.maximum(a.steps[k // ra].theta, 0.0))
        tb = np.sqrt(np.maximum(b.steps[k // rb].theta, 0.0))
        l2 += dt * g.norm_h(ta - tb) ** 2
    return {"log_theta_C0_Vprime": lv, "chi_C0_V": cv, "sqrt_theta_L2_H": math.sqrt(l2)}


def _run_member(args):
    from .scheme import run

    config, kw = args
    return run(config, **kw)


def _run_all(configs, jobs: int | None, kw: dict | None = None):
    kw = kw or {}
    if jobs is None or jobs <= 1 or len(configs) == 1:
        return [_run_member((c, kw)) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_member, [(c, kw) for c in configs]))


def _assemble(kind, values, trajs, strides_to, cg_tol) -> StudyReport:
    rep = StudyReport(kind=kind, values=list(values))
    for i, tr in enumerate(trajs):
        rep.min_theta.append(float(min(np.min(s.theta) for s in tr.steps)))
        rep.obstacle.append(obstacle_violation(tr)[0] if tr.config.graph_beta.kind == "box" else None)
    ref = trajs[-1]
    for q in STUDY_QUANTITIES:
        rep.successive[q] = []
        rep.vs_reference[q] = []
    for k in range(len(trajs) - 1):
        d = _distance(trajs[k], trajs[k + 1], *strides_to(k, k + 1), cg_tol)
        r = _distance(trajs[k], ref, *strides_to(k, len(trajs) - 1), cg_tol)
        for q in STUDY_QUANTITIES:
            rep.successive[q].append(d[q])
            rep.vs_reference[q].append(r[q])
        if values[k] == values[k + 1]:
            rep.flags.append(f"duplicate ladder entry {values[k]!r} (members {k}, {k + 1}): zero difference skipped")
    for q in STUDY_QUANTITIES:
        keep = [(values[k], d) for k, d in enumerate(rep.successive[q]) if values[k] != values[k + 1]]
        rep.orders[q] = _fit_order([h for h, _ in keep], [d for _, d in keep])
        ds = [d for _, d in keep]
        rep.monotone[q] = len(ds) >= 2 and all(b < a for a, b in zip(ds, ds[1:]))
    return rep


def tau_study(config, taus, jobs: int | None = 1, run_kwargs: dict | None = None) -> StudyReport:
    """Self-convergence in tau; every tau must divide T and the coarsest tau evenly."""
    taus = [float(t) for t in taus]
    if len(taus) < 3:
        raise StudyError("a tau study needs at least 3 ladder entries")
    if any(b > a for a, b in zip(taus, taus[1:])):
        raise StudyError("tau ladder must be nonincreasing (coarse to fine)")
    Ns = []
    for t in taus:
        n = round(config.T / t)
        if n < 1 or abs(n * t - config.T) > 1e-9 * config.T:
            raise StudyError(f"tau = {t!r} does not divide T = {config.T!r}")
        Ns.append(n)
    for a, b in zip(Ns, Ns[1:]):
        if b % a:
            raise StudyError(f"tau ladder is not nested: N = {a} does not divide N = {b}")
    configs = [replace(config, N=n) for n in Ns]
    trajs = _run_all(configs, jobs, run_kwargs)
    rep = _assemble("tau", taus, trajs, lambda i, j: (1, Ns[j] // Ns[i]), config.cg_tol)
    if config.eps_policy.kind == "ladder":
        # exact ln carried against ln_eps solved: an O(T eps_min / tau) drift
        drift = config.T * config.eps_policy.eps_min / taus[-1]
        rep.flags.append(
            f"ladder policy: carried exact log differs from the solved ln_eps by O(eps_min) per step; "
            f"accumulated drift ~ T eps_min / tau = {drift:.3g} at the finest tau can mask convergence"
        )
    return rep


def eps_study(config, epss, jobs: int | None = 1, run_kwargs: dict | None = None) -> StudyReport:
    """Cauchy study in eps at fixed tau; each member runs at one fixed eps."""
    from .scheme import EpsPolicy

    epss = [float(e) for e in epss]
    if len(epss) < 3:
        raise StudyError("an eps study needs at least 3 ladder entries")
    if any(b > a for a, b in zip(epss, epss[1:])):
        raise StudyError("eps ladder must be nonincreasing")
    if epss[0] > 1 or epss[-1] <= 0:
        raise StudyError("eps ladder must lie in (0, 1]")
    configs = [replace(config, eps_policy=EpsPolicy(kind="fixed", eps=e)) for e in epss]
    trajs = _run_all(configs, jobs, run_kwargs)
    return _assemble("eps", epss, trajs, lambda i, j: (1, 1), config.cg_tol)
