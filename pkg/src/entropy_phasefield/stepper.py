"""One time step of the regularized scheme.

Given g, h the step solves

    tau^(1/2) Theta + ln_eps(Theta) + tau A_eps(Theta - theta*) - tau k0 Lap Theta = -ell X + g
    X - tau Lap X + tau beta_eps(X) + tau pi(X) = h + tau ell Theta

by the contraction Theta_bar -> X(Theta_bar) -> Theta(X), each half solved by a
damped (semismooth) Newton method whose linear systems go through CG.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import CGConvergenceError, GridSpec, cg_solve
from .monotone import (
    NonlocalOp,
    PiFunction,
    ScalarGraph,
    graph_yosida,
    log_resolvent,
    log_yosida,
    nonlocal_yosida,
    nonlocal_yosida_jacobian,
)

log = logging.getLogger(__name__)

__all__ = [
    "StepParams",
    "StepInputs",
    "StepResult",
    "StepFailure",
    "ParameterError",
    "solve_chi",
    "solve_theta",
    "pointwise_theta",
    "fixed_point_step",
    "epsilon_ladder_step",
    "step_residuals",
    "contraction_bound",
]


class ParameterError(ValueError):
    """A step-size or regularization condition of the scheme is violated."""


class StepFailure(RuntimeError):
    def __init__(self, message: str, **context):
        detail = ", ".join(f"{k}={v}" for k, v in context.items())
        super().__init__(f"{message} ({detail})" if detail else message)
        self.context = context


@dataclass(frozen=True)
class StepParams:
    tau: float
    eps: float
    k0: float = 1.0
    ell: float = 1.0
    outer_tol: float = 1e-8
    newton_tol: float = 1e-10
    cg_tol: float = 1e-12
    outer_maxit: int = 200
    newton_maxit: int = 60
    cg_maxit: int = 20000
    stabilize: bool = True

    @property
    def s(self) -> float:
        """Coefficient of the tau^(1/2) viscosity term (0 when switched off)."""
        return float(np.sqrt(self.tau)) if self.stabilize else 0.0

    def violations(self, pi: PiFunction | None = None, T: float | None = None) -> list[str]:
        """Human-readable list of violated step conditions (empty when admissible)."""
        out = []
        tau, ell = self.tau, self.ell
        if not tau > 0:
            out.append(f"tau = {tau!r} must be positive")
        if not self.k0 > 0:
            out.append(f"k0 = {self.k0!r} must be positive")
        if ell != 0 and not tau < 1.0 / (8.0 * ell**4):
            out.append(f"tau = {tau!r} violates tau < 1/(8 ell^4) = {1.0 / (8.0 * ell**4)!r}")
        if pi is not None and pi.lipschitz > 0 and not tau < 1.0 / (2.0 * pi.lipschitz):
            out.append(f"tau = {tau!r} violates tau < 1/(2 C_pi) = {1.0 / (2.0 * pi.lipschitz)!r}")
        limit = 1.0 if T is None else min(1.0, T)
        if not tau <= limit:
            out.append(f"tau = {tau!r} violates tau <= min(1, T) = {limit!r}")
        if not 0 < self.eps <= 1:
            out.append(f"eps = {self.eps!r} violates 0 < eps <= 1")
        return out

    def validate(self, pi: PiFunction | None = None, T: float | None = None) -> None:
        bad = self.violations(pi, T)
        if bad:
            raise ParameterError("; ".join(bad))


@dataclass
class StepInputs:
    grid: GridSpec
    g: np.ndarray
    h: np.ndarray
    theta_star: np.ndarray
    graph_beta: ScalarGraph
    op_A: NonlocalOp
    pi: PiFunction


@dataclass
class StepResult:
    theta: np.ndarray
    chi: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    eps: float
    outer_iters: int = 0
    total_newton_iters: int = 0
    total_cg_iters: int = 0
    contraction_ratios: list[float] = field(default_factory=list)
    outer_differences: list[float] = field(default_factory=list)
    residual_theta: float = float("nan")
    residual_chi: float = float("nan")
    damped_steps: int = 0
    merit_monotone: bool = True
    ladder_differences: list[float] = field(default_factory=list)


@dataclass
class _Stats:
    newton: int = 0
    cg: int = 0
    damped: int = 0
    monotone: bool = True


def contraction_bound(tau: float, ell: float) -> float:
    """Lipschitz constant 2 tau^(1/2) ell^2 of the outer map in H."""
    return 2.0 * np.sqrt(tau) * ell**2


def _newton(residual, jacobian, x0, grid: GridSpec, params: StepParams, stats: _Stats, what: str):
    x = np.array(x0, dtype=float, copy=True)
    r = residual(x)
    merit = grid.norm_h(r)
    damped_here = 0
    for k in range(params.newton_maxit + 1):
        if grid.norm_linf(r) <= params.newton_tol:
            return x
        if k == params.newton_maxit:
            break
        apply, diag = jacobian(x)
        try:
            dx, its = cg_solve(apply, -r, params.cg_tol, params.cg_maxit, diag, grid)
        except CGConvergenceError as exc:
            raise StepFailure(f"CG failed inside the {what} Newton solve", newton_iter=k, cg_residual=exc.residual) from exc
        stats.newton += 1
        stats.cg += its
        step = 1.0
        for _ in range(21):
            xn = x + step * dx
            rn = residual(xn)
            mn = grid.norm_h(rn)
            if mn < merit:
                break
            step *= 0.5
        else:
            raise StepFailure(
                f"{what} Newton line search stalled",
                newton_iter=k,
                residual_linf=grid.norm_linf(r),
            )
        if step < 1.0:
            stats.damped += 1
            damped_here += 1
            log.debug("%s Newton step %d damped to %g", what, k, step)
            if damped_here > 1:
                stats.monotone = False
        x, r, merit = xn, rn, mn
    raise StepFailure(f"{what} Newton did not converge", iterations=params.newton_maxit, residual_linf=grid.norm_linf(r))


def solve_chi(
    theta_bar: np.ndarray,
    inputs: StepInputs,
    params: StepParams,
    x0: np.ndarray | None = None,
    stats: _Stats | None = None,
) -> np.ndarray:
    """Solve the order-parameter equation for a frozen temperature ``theta_bar``."""
    grid = inputs.grid
    grid.check(theta_bar)
    tau, eps = params.tau, params.eps
    L = grid.laplacian_matrix
    shape = grid.shape
    beta, pi = inputs.graph_beta, inputs.pi
    rhs = inputs.h + tau * params.ell * theta_bar
    stats = stats if stats is not None else _Stats()

    def lap(v):
        return (L @ v.ravel()).reshape(shape)

    def residual(x):
        b, _ = graph_yosida(beta, eps, x)
        return x - tau * lap(x) + tau * b + tau * pi(x) - rhs

    def jacobian(x):
        _, db = graph_yosida(beta, eps, x)
        d = 1.0 + tau * pi.p1 + tau * db
        return (lambda v: d * v - tau * lap(v)), d - tau * grid.laplacian_diagonal

    start = inputs.h if x0 is None else x0
    return _newton(residual, jacobian, start, grid, params, stats, "chi")


def pointwise_theta(c: np.ndarray, s: float, eps: float) -> np.ndarray:
    """Pointwise root of s*Theta + ln_eps(Theta) = c (s is tau^(1/2) or 0).

    With y = L_eps(Theta) the equation becomes y + ((1 + eps s)/s) ln y = c/s,
    another log resolvent.
    """
    c = np.asarray(c, dtype=float)
    if s == 0:
        y = np.exp(c)
    else:
        y = log_resolvent((1.0 + eps * s) / s, c / s)
    return y + eps * np.log(y)


def solve_theta(
    x_field: np.ndarray,
    inputs: StepInputs,
    params: StepParams,
    theta0: np.ndarray | None = None,
    stats: _Stats | None = None,
) -> np.ndarray:
    """Solve the entropy equation for a given order parameter ``x_field``.

    The Yosida term of A enters the Newton Jacobian: a diagonal for the local
    sign, a scaled identity minus a rank-one H-projection for the nonlocal one.
    """
    grid = inputs.grid
    grid.check(x_field)
    tau, eps, k0 = params.tau, params.eps, params.k0
    s = params.s
    L = grid.laplacian_matrix
    shape = grid.shape
    dV = grid.dV
    op = inputs.op_A
    rhs = inputs.g - params.ell * x_field
    stats = stats if stats is not None else _Stats()

    def lap(v):
        return (L @ v.ravel()).reshape(shape)

    def residual(th):
        ln, _ = log_yosida(eps, th)
        za = nonlocal_yosida(op, eps, th - inputs.theta_star, dV)
        return s * th + ln + tau * za - tau * k0 * lap(th) - rhs

    def jacobian(th):
        _, dln = log_yosida(eps, th)
        da, rank_one = nonlocal_yosida_jacobian(op, eps, th - inputs.theta_star, dV)
        d = s + dln + tau * da
        diag = d - tau * k0 * grid.laplacian_diagonal
        if rank_one is None:
            return (lambda v: d * v - tau * k0 * lap(v)), diag
        c, w = rank_one
        cw = tau * c * dV

        def apply(v):
            return d * v - tau * k0 * lap(v) - cw * float(np.vdot(w, v)) * w

        return apply, diag

    start = pointwise_theta(rhs, s, eps) if theta0 is None else theta0
    return _newton(residual, jacobian, start, grid, params, stats, "theta")


def step_residuals(result: StepResult, inputs: StepInputs, params: StepParams) -> tuple[float, float]:
    """L-infinity residuals of both step equations, recomputed from the stencil."""
    grid = inputs.grid
    tau, eps = params.tau, result.eps
    th, x = result.theta, result.chi
    ln, _ = log_yosida(eps, th)
    za = nonlocal_yosida(inputs.op_A, eps, th - inputs.theta_star, grid.dV)
    r_theta = (
        params.s * th + ln + tau * za - tau * params.k0 * grid.laplacian(th) + params.ell * x - inputs.g
    )
    b, _ = graph_yosida(inputs.graph_beta, eps, x)
    r_chi = x - tau * grid.laplacian(x) + tau * b + tau * inputs.pi(x) - inputs.h - tau * params.ell * th
    return grid.norm_linf(r_theta), grid.norm_linf(r_chi)


def fixed_point_step(
    inputs: StepInputs,
    params: StepParams,
    theta_init: np.ndarray | None = None,
    chi_init: np.ndarray | None = None,
) -> StepResult:
    """Banach iteration Theta_bar -> solve_theta(solve_chi(Theta_bar)) until the H increment <= outer_tol.

    Without ``theta_init`` the iteration starts from the pointwise solution of
    tau^(1/2) Theta + ln_eps(Theta) = g.
    """
    grid = inputs.grid
    grid.check(inputs.g, inputs.h, inputs.theta_star)
    stats = _Stats()
    if theta_init is None:
        theta_bar = pointwise_theta(inputs.g, params.s, params.eps)
    else:
        theta_bar = np.array(theta_init, dtype=float, copy=True)
    chi = inputs.h if chi_init is None else chi_init
    diffs: list[float] = []
    ratios: list[float] = []
    for k in range(1, params.outer_maxit + 1):
        chi = solve_chi(theta_bar, inputs, params, x0=chi, stats=stats)
        theta = solve_theta(chi, inputs, params, theta0=theta_bar, stats=stats)
        d = grid.norm_h(theta - theta_bar)
        if diffs and diffs[-1] > 0:
            ratios.append(d / diffs[-1])
        diffs.append(d)
        theta_bar = theta
        if d <= params.outer_tol:
            break
    else:
        raise StepFailure("outer fixed point did not converge", outer_maxit=params.outer_maxit, last_difference=diffs[-1])
    zeta = nonlocal_yosida(inputs.op_A, params.eps, theta - inputs.theta_star, grid.dV)
    xi, _ = graph_yosida(inputs.graph_beta, params.eps, chi)
    result = StepResult(
        theta=theta,
        chi=chi,
        zeta=zeta,
        xi=np.asarray(xi, dtype=float),
        eps=params.eps,
        outer_iters=k,
        total_newton_iters=stats.newton,
        total_cg_iters=stats.cg,
        contraction_ratios=ratios,
        outer_differences=diffs,
        damped_steps=stats.damped,
        merit_monotone=stats.monotone,
    )
    result.residual_theta, result.residual_chi = step_residuals(result, inputs, params)
    return result


def epsilon_ladder_step(
    inputs: StepInputs,
    params: StepParams,
    ladder,
    theta_init: np.ndarray | None = None,
    chi_init: np.ndarray | None = None,
) -> StepResult:
    """Continuation in eps: one fixed-point solve per rung, each warm-started from the last.

    The returned result belongs to the final rung and carries the H distances
    between consecutive rungs in ``ladder_differences``.
    """
    ladder = [float(e) for e in ladder]
    if not ladder:
        raise ParameterError("empty eps ladder")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ParameterError("eps ladder must be strictly decreasing")
    if ladder[0] > 1:
        raise ParameterError(f"eps ladder starts at {ladder[0]!r} > 1")
    if ladder[-1] != params.eps:
        raise ParameterError(f"eps ladder ends at {ladder[-1]!r}, expected eps = {params.eps!r}")
    grid = inputs.grid
    prev = None
    diffs: list[float] = []
    outer = newton = cgs = damped = 0
    monotone = True
    theta, chi = theta_init, chi_init
    for eps in ladder:
        res = fixed_point_step(inputs, replace(params, eps=eps), theta_init=theta, chi_init=chi)
        if prev is not None:
            diffs.append(grid.norm_h(res.theta - prev.theta))
        outer += res.outer_iters
        newton += res.total_newton_iters
        cgs += res.total_cg_iters
        damped += res.damped_steps
        monotone = monotone and res.merit_monotone
        theta, chi = res.theta, res.chi
        prev = res
    prev.ladder_differences = diffs
    prev.outer_iters = outer
    prev.total_newton_iters = newton
    prev.total_cg_iters = cgs
    prev.damped_steps = damped
    prev.merit_monotone = monotone
    return prev
