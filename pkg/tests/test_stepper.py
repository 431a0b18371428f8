import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from entropy_phasefield.grid import GridSpec
from entropy_phasefield.monotone import NonlocalOp, PiFunction, ScalarGraph, graph_yosida, log_yosida, nonlocal_yosida
from entropy_phasefield.stepper import (
    ParameterError,
    StepFailure,
    StepInputs,
    StepParams,
    StepResult,
    contraction_bound,
    epsilon_ladder_step,
    fixed_point_step,
    pointwise_theta,
    solve_chi,
    solve_theta,
    step_residuals,
)

GRID = GridSpec((1.0,), (64,))


def make_inputs(g, h, beta=None, op=None, pi=None, theta_star=1.0, grid=GRID):
    return StepInputs(
        grid=grid,
        g=np.broadcast_to(np.asarray(g, float), grid.shape).copy(),
        h=np.broadcast_to(np.asarray(h, float), grid.shape).copy(),
        theta_star=grid.full(theta_star),
        graph_beta=beta or ScalarGraph.zero(),
        op_A=op or NonlocalOp("zero"),
        pi=pi or PiFunction(0.0, 0.0),
    )


def random_inputs(rng, grid=GRID, beta=None, op=None):
    (x,) = grid.centers()
    k = rng.integers(1, 4)
    g = 0.5 + rng.normal(scale=0.3) * np.cos(k * np.pi * x) + rng.normal(scale=0.1, size=grid.shape)
    h = np.clip(0.5 + 0.3 * np.cos(np.pi * x) + rng.normal(scale=0.1, size=grid.shape), 0, 1)
    return make_inputs(g, h, beta=beta, op=op, pi=PiFunction(float(rng.uniform(-1, 1)), float(rng.uniform(-1, 1))))


# -- parameters -------------------------------------------------------------


def test_step_params_restrictions():
    assert StepParams(tau=1e-3, eps=1e-2).violations() == []
    msgs = StepParams(tau=0.2, eps=1e-2, ell=1.0).violations()
    assert any("1/(8 ell^4)" in m for m in msgs)
    msgs = StepParams(tau=0.1, eps=1e-2, ell=0.5).violations(PiFunction(10.0, 0.0))
    assert any("1/(2 C_pi)" in m for m in msgs)
    assert any("eps" in m for m in StepParams(tau=1e-3, eps=2.0).violations())
    assert any("min(1, T)" in m for m in StepParams(tau=0.05, eps=0.1, ell=0.0).violations(T=0.01))
    with pytest.raises(ParameterError):
        StepParams(tau=0.2, eps=1e-2).validate()


def test_contraction_bound():
    assert contraction_bound(1e-3, 1.0) == pytest.approx(2 * math.sqrt(1e-3))
    assert contraction_bound(1e-3, 0.5) == pytest.approx(2 * math.sqrt(1e-3) / 4)


# -- solve_chi ----------------------------------------------------------------


def test_solve_chi_trivial_cases():
    p = StepParams(tau=1e-3, eps=1e-3)
    for beta in (ScalarGraph.zero(), ScalarGraph.box(0, 1), ScalarGraph.power(3)):
        x = solve_chi(GRID.zeros(), make_inputs(0.0, 0.0, beta=beta), p)
        assert np.all(np.abs(x) <= 1e-12)
    x = solve_chi(GRID.zeros(), make_inputs(0.0, 0.5, beta=ScalarGraph.box(0, 1)), p)
    assert np.allclose(x, 0.5, atol=1e-12)


def test_solve_chi_obstacle_value():
    # X + (tau/eps)(X - 1) = 1.2 with tau/eps = 1
    p = StepParams(tau=1e-3, eps=1e-3)
    x = solve_chi(GRID.zeros(), make_inputs(0.0, 1.2, beta=ScalarGraph.box(0, 1)), p)
    oracle = brentq(lambda X: X + (X - 1.0) - 1.2, 0.0, 2.0, xtol=1e-15)
    assert np.allclose(x, oracle, atol=1e-11)
    assert oracle == pytest.approx(1.1)


# -- solve_theta ----------------------------------------------------------------


def test_solve_theta_constant_state():
    tau, eps = 1e-3, 1e-3
    p = StepParams(tau=tau, eps=eps)
    th = solve_theta(GRID.zeros(), make_inputs(math.sqrt(tau), 0.0), p)
    assert np.allclose(th, 1.0, atol=1e-12)


def test_solve_theta_scalar_oracle():
    tau, eps, ell = 1e-3, 1e-4, 1.0
    p = StepParams(tau=tau, eps=eps, ell=ell)
    c, xbar = -1.3, 0.4
    th = solve_theta(GRID.full(xbar), make_inputs(c, 0.0), p)
    oracle = brentq(lambda t: math.sqrt(tau) * t + log_yosida(eps, t)[0] - (c - ell * xbar), 1e-6, 10, xtol=1e-15)
    assert np.allclose(th, oracle, atol=1e-10)


def test_solve_theta_decoupled_when_ell_zero():
    rng = np.random.default_rng(0)
    inp = random_inputs(rng, op=NonlocalOp("sign_nonlocal"))
    p = StepParams(tau=1e-3, eps=1e-2, ell=0.0)
    a = solve_theta(GRID.zeros(), inp, p)
    b = solve_theta(rng.normal(size=GRID.shape), inp, p)
    assert np.array_equal(a, b) or np.max(np.abs(a - b)) < 1e-12


def test_pointwise_theta_inverts():
    c = np.linspace(-3, 3, 13)
    for s in (math.sqrt(1e-3), 0.0):
        th = pointwise_theta(c, s, 1e-3)
        assert np.allclose(s * th + log_yosida(1e-3, th)[0], c, atol=1e-12)


# -- fixed point ----------------------------------------------------------------


def test_ell_zero_converges_in_two_iterations():
    rng = np.random.default_rng(1)
    res = fixed_point_step(random_inputs(rng, beta=ScalarGraph.box(0, 1)), StepParams(tau=1e-3, eps=1e-2, ell=0.0))
    assert res.outer_iters == 2
    assert res.outer_differences[-1] == 0.0


@pytest.mark.parametrize("op", ["zero", "sign_nonlocal", "sign_local"])
@pytest.mark.parametrize("beta", [ScalarGraph.zero(), ScalarGraph.box(0, 1), ScalarGraph.power(3)], ids=lambda b: b.describe())
def test_fixed_point_step_converges(op, beta):
    rng = np.random.default_rng(7)
    inp = random_inputs(rng, beta=beta, op=NonlocalOp(op))
    for eps in (1e-2, 1e-5):
        p = StepParams(tau=1e-3, eps=eps, ell=1.0)
        res = fixed_point_step(inp, p)
        assert res.residual_theta <= 10 * p.newton_tol and res.residual_chi <= 10 * p.newton_tol
        assert all(r <= 2 * math.sqrt(1e-3) + 0.05 for r in res.contraction_ratios)
        assert np.array_equal(res.zeta, nonlocal_yosida(inp.op_A, eps, res.theta - inp.theta_star, GRID.dV))
        assert np.array_equal(res.xi, np.asarray(graph_yosida(beta, eps, res.chi)[0]) * np.ones(GRID.shape))
        assert res.merit_monotone


def scalar_oracle(g, h, tau, eps, ell, beta, pi, op, theta_star, volume):
    """Solve the two constant-field equations by nested bracketing."""

    def a_eps(v):
        if op == "zero":
            return 0.0
        if op == "sign_local":
            return max(-1.0, min(1.0, v / eps))
        return v / max(abs(v) * math.sqrt(volume), eps)

    def chi_of(th):
        f = lambda X: X + tau * float(graph_yosida(beta, eps, X)[0]) + tau * pi(X) - h - tau * ell * th  # noqa: E731
        return brentq(f, -50, 50, xtol=1e-15, rtol=1e-15)

    def theta_eq(th):
        return math.sqrt(tau) * th + log_yosida(eps, th)[0] + tau * a_eps(th - theta_star) + ell * chi_of(th) - g

    th = brentq(theta_eq, 1e-12, 50, xtol=1e-15, rtol=1e-15)
    return th, chi_of(th)


@pytest.mark.parametrize("op", ["zero", "sign_nonlocal", "sign_local"])
def test_constant_data_matches_scalar_oracle(op):
    tau, eps, ell = 1e-3, 1e-3, 1.0
    beta = ScalarGraph.box(0, 1)
    pi = PiFunction(0.5, -0.2)
    inp = make_inputs(0.3, 0.9, beta=beta, op=NonlocalOp(op), pi=pi, theta_star=1.2)
    res = fixed_point_step(inp, StepParams(tau=tau, eps=eps, ell=ell))
    th, x = scalar_oracle(0.3, 0.9, tau, eps, ell, beta, pi, op, 1.2, GRID.volume)
    assert np.max(np.abs(res.theta - th)) <= 1e-9
    assert np.max(np.abs(res.chi - x)) <= 1e-9


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31), ell=st.sampled_from([0.5, 1.0]))
def test_outer_map_contracts(seed, ell):
    rng = np.random.default_rng(seed)
    tau = 1e-3
    inp = random_inputs(rng, beta=ScalarGraph.box(0, 1), op=NonlocalOp("sign_nonlocal"))
    p = StepParams(tau=tau, eps=1e-2, ell=ell)
    base = pointwise_theta(inp.g, p.s, p.eps)
    t1 = base + rng.normal(scale=0.05, size=GRID.shape)
    t2 = base + rng.normal(scale=0.05, size=GRID.shape)
    x1, x2 = solve_chi(t1, inp, p), solve_chi(t2, inp, p)
    d = GRID.norm_h(t1 - t2)
    assert GRID.norm_h(x1 - x2) <= 2 * tau * ell * d * 1.05
    th1, th2 = solve_theta(x1, inp, p), solve_theta(x2, inp, p)
    assert GRID.norm_h(th1 - th2) <= contraction_bound(tau, ell) * d * 1.05


def test_uniqueness_from_different_starts():
    rng = np.random.default_rng(5)
    inp = random_inputs(rng, beta=ScalarGraph.box(0, 1), op=NonlocalOp("sign_nonlocal"))
    p = StepParams(tau=1e-3, eps=1e-4)
    a = fixed_point_step(inp, p)
    b = fixed_point_step(inp, p, theta_init=np.full(GRID.shape, 3.0), chi_init=GRID.zeros())
    assert GRID.norm_h(a.theta - b.theta) <= 10 * p.outer_tol
    assert GRID.norm_h(a.chi - b.chi) <= 10 * p.outer_tol


# -- eps ladder ---------------------------------------------------------------


def test_ladder_of_one_is_fixed_point_step():
    rng = np.random.default_rng(2)
    inp = random_inputs(rng, beta=ScalarGraph.box(0, 1))
    p = StepParams(tau=1e-3, eps=1e-3)
    a = fixed_point_step(inp, p)
    b = epsilon_ladder_step(inp, p, [1e-3])
    assert np.array_equal(a.theta, b.theta) and np.array_equal(a.chi, b.chi)
    assert b.ladder_differences == []


def test_ladder_differences_decrease_on_constant_data():
    inp = make_inputs(-0.5, 0.0)
    ladder = [1e-1 * 2.0**-k for k in range(12)]
    res = epsilon_ladder_step(inp, StepParams(tau=1e-3, eps=ladder[-1]), ladder)
    d = res.ladder_differences
    assert len(d) == len(ladder) - 1
    assert all(b < a for a, b in zip(d, d[1:]))


def test_ladder_warm_vs_cold():
    rng = np.random.default_rng(3)
    inp = random_inputs(rng, beta=ScalarGraph.box(0, 1), op=NonlocalOp("sign_local"))
    p = StepParams(tau=1e-3, eps=1e-5)
    warm = epsilon_ladder_step(inp, p, [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    cold = fixed_point_step(inp, p)
    assert GRID.norm_h(warm.theta - cold.theta) <= 10 * p.outer_tol


def test_ladder_validation():
    inp = make_inputs(0.0, 0.0)
    p = StepParams(tau=1e-3, eps=1e-3)
    for bad in ([], [1e-2, 1e-2, 1e-3], [2.0, 1e-3], [1e-2, 1e-4]):
        with pytest.raises(ParameterError):
            epsilon_ladder_step(inp, p, bad)


# -- residuals and failures -----------------------------------------------------


def test_step_residuals():
    rest = StepResult(theta=GRID.full(1.0), chi=GRID.zeros(), zeta=GRID.zeros(), xi=GRID.zeros(), eps=1e-3)
    assert step_residuals(rest, make_inputs(math.sqrt(1e-3), 0.0), StepParams(tau=1e-3, eps=1e-3, ell=0.0)) == (0.0, 0.0)
    p = StepParams(tau=1e-3, eps=1e-3)
    rng = np.random.default_rng(4)
    inp = random_inputs(rng, beta=ScalarGraph.box(0, 1))
    res = fixed_point_step(inp, p)
    assert max(step_residuals(res, inp, p)) <= 10 * p.newton_tol
    res.theta = res.theta + 1e-3
    assert step_residuals(res, inp, p)[0] >= math.sqrt(1e-3) * 1e-3 / 2


def test_step_failure_carries_context():
    rng = np.random.default_rng(6)
    inp = random_inputs(rng, beta=ScalarGraph.box(0, 1))
    with pytest.raises(StepFailure) as err:
        fixed_point_step(inp, StepParams(tau=1e-3, eps=1e-3, outer_maxit=1, outer_tol=1e-14))
    assert err.value.context["outer_maxit"] == 1
