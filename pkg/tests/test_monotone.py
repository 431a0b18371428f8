import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from entropy_phasefield.monotone import (
    NonlocalOp,
    PiFunction,
    ScalarGraph,
    graph_contains,
    graph_moreau,
    graph_primitive,
    graph_resolvent,
    graph_yosida,
    growth_constant,
    initial_selection,
    log_moreau,
    log_primitive,
    log_resolvent,
    log_resolvent_derivative,
    log_yosida,
    nonlocal_potential,
    nonlocal_resolvent,
    nonlocal_yosida,
    nonlocal_yosida_jacobian,
)

eps_st = st.floats(1e-6, 1.0)
x_st = st.floats(-50.0, 50.0)
pos_st = st.floats(1e-8, 1e8)
GRAPHS = [ScalarGraph.box(0.0, 1.0), ScalarGraph.box(-0.5, 2.0), ScalarGraph.power(3), ScalarGraph.power(5), ScalarGraph.zero()]


# -- log graph ------------------------------------------------------------


def test_log_resolvent_examples():
    assert log_resolvent(1.0, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert log_resolvent(0.3, math.e + 0.3) == pytest.approx(math.e, abs=1e-14)


def test_log_resolvent_matches_brentq():
    # independent oracle: bracketed root in u = ln y of e^u + eps u = x
    for eps, x in [(0.5, 0.0), (1e-3, -2.0), (1e-5, 3.0), (0.7, 40.0), (1e-4, -0.01)]:
        lo, hi = -(abs(x) + 1) / eps - 50, math.log(abs(x) + 2) + 1
        u = brentq(lambda u: math.exp(u) + eps * u - x, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
        assert log_resolvent(eps, x) == pytest.approx(math.exp(u), rel=1e-13, abs=1e-300)


def test_log_yosida_values():
    val, der = log_yosida(0.5, 0.0)
    assert val == pytest.approx(-0.852605502, abs=1e-9)
    y = log_resolvent(0.5, 0.0)
    assert der == pytest.approx(1.0 / (y + 0.5))
    assert log_moreau(0.5, 0.0) == pytest.approx(0.391963, abs=1e-6)
    assert 0 < log_moreau(0.5, 2.0) < log_primitive(2.0)


@settings(max_examples=300, deadline=None)
@given(eps=eps_st, x=x_st)
def test_log_resolvent_solves_equation(eps, x):
    y = log_resolvent(eps, x)
    assert y > 0
    # ln_eps(x) is ln y, exact even where y itself underflows
    u, _ = log_yosida(eps, x)
    assert abs(math.exp(u) + eps * u - x) <= 4e-14 * max(1.0, abs(x))
    if u > -700:
        assert abs(y + eps * math.log(y) - x) <= 4e-14 * max(1.0, abs(x))


@settings(max_examples=300, deadline=None)
@given(eps=eps_st, x=pos_st)
def test_log_yosida_bounded_by_log(eps, x):
    val, _ = log_yosida(eps, x)
    assert abs(val) <= abs(math.log(x)) + 1e-12
    assert -1e-12 <= log_moreau(eps, x) <= log_primitive(x) + 1e-12 * max(1.0, log_primitive(x))


@settings(max_examples=200, deadline=None)
@given(eps=eps_st, a=x_st, b=x_st)
def test_log_resolvent_nonexpansive_and_yosida_lipschitz(eps, a, b):
    ra, rb = log_resolvent(eps, a), log_resolvent(eps, b)
    assert abs(ra - rb) <= abs(a - b) * (1 + 1e-12) + 1e-300
    ya, yb = log_yosida(eps, a)[0], log_yosida(eps, b)[0]
    assert abs(ya - yb) <= abs(a - b) / eps * (1 + 1e-9) + 1e-12
    if a <= b:
        assert ra <= rb and ya <= yb + 1e-12


@settings(max_examples=200, deadline=None)
@given(eps=eps_st, x=st.floats(-10, 10))
def test_log_resolvent_derivative_is_finite_difference(eps, x):
    y = log_resolvent(eps, x)
    # the map bends on the scale y + eps
    h = 1e-4 * (y + eps)
    fd = (log_resolvent(eps, x + h) - log_resolvent(eps, x - h)) / (2 * h)
    assert log_resolvent_derivative(eps, x) == pytest.approx(y / (y + eps))
    assert log_resolvent_derivative(eps, x) == pytest.approx(fd, rel=1e-5, abs=1e-12)


def test_log_resolvent_vectorized():
    x = np.linspace(-5, 5, 11)
    y = log_resolvent(0.1, x)
    assert y.shape == x.shape
    assert np.all(np.diff(y) > 0)


# -- scalar graphs ----------------------------------------------------------


def test_box_resolvent_is_clamp():
    g = ScalarGraph.box(0.0, 1.0)
    for eps in (1e-3, 0.5, 1.0):
        assert graph_resolvent(g, eps, -2.0) == 0.0
        assert graph_resolvent(g, eps, 0.3) == 0.3
        assert graph_resolvent(g, eps, 7.0) == 1.0
    val, der = graph_yosida(g, 0.1, 1.5)
    assert val == pytest.approx(5.0)
    assert der == pytest.approx(10.0)


def test_power_resolvent_values():
    g = ScalarGraph.power(3)
    r = graph_resolvent(g, 0.1, 1.0)
    assert r + 0.1 * r**3 == pytest.approx(1.0, abs=1e-15)
    # independent check: direct root of r + 0.1 r^3 = 1
    assert r == pytest.approx(brentq(lambda t: t + 0.1 * t**3 - 1.0, 0, 1, xtol=1e-16), abs=1e-14)
    assert graph_moreau(g, 0.1, 1.0) == pytest.approx(r**4 / 4 + (1 - r) ** 2 / 0.2, rel=1e-12)
    assert graph_resolvent(g, 1.0, 2.0) == pytest.approx(1.0, abs=1e-15)


def test_zero_graph():
    g = ScalarGraph.zero()
    assert graph_resolvent(g, 0.3, 4.0) == 4.0
    assert graph_yosida(g, 0.3, 4.0)[0] == 0.0
    assert graph_moreau(g, 0.3, 4.0) == 0.0


@pytest.mark.parametrize("g", GRAPHS, ids=lambda g: g.describe())
@settings(max_examples=150, deadline=None)
@given(eps=eps_st, a=x_st, b=x_st)
def test_graph_resolvent_properties(g, eps, a, b):
    ra, rb = graph_resolvent(g, eps, a), graph_resolvent(g, eps, b)
    assert abs(ra - rb) <= abs(a - b) * (1 + 1e-12) + 1e-15
    va, da = graph_yosida(g, eps, a)
    vb, _ = graph_yosida(g, eps, b)
    # resolvent identity x = R(x) + eps beta_eps(x)
    assert abs(ra + eps * va - a) <= 1e-12 * max(1.0, abs(a))
    # the difference quotient carries rounding of order ulp(a)/eps
    assert va == pytest.approx((a - ra) / eps, rel=1e-12, abs=4 * np.spacing(max(1.0, abs(a))) / eps)
    assert abs(va - vb) <= abs(a - b) / eps * (1 + 1e-9) + 1e-9
    assert 0 <= da <= 1 / eps * (1 + 1e-12)
    if a < b:
        assert ra <= rb and va <= vb + 1e-9
    # resolvent identity: the Yosida value lies in beta(resolvent)
    assert graph_contains(g, ra, va, atol=1e-9 * max(1.0, abs(va)))
    m = graph_moreau(g, eps, a)
    assert m >= -1e-15
    prim = graph_primitive(g, a)
    assert m <= prim * (1 + 1e-12) + 1e-15


def test_graph_domain_and_selection():
    box = ScalarGraph.box(0.0, 1.0)
    assert box.zero_in_graph_at_zero
    assert not ScalarGraph.box(0.2, 1.0).zero_in_graph_at_zero
    assert list(box.in_domain(np.array([-0.1, 0.0, 1.0, 1.1]))) == [False, True, True, False]
    chi0 = np.array([0.0, 0.5, 1.0])
    assert np.all(initial_selection(box, chi0) == 0)
    assert np.allclose(initial_selection(ScalarGraph.power(3), chi0), chi0**3)
    with pytest.raises(ValueError):
        initial_selection(box, np.array([1.5]))


def test_pi_function():
    pi = PiFunction(2.0, -1.0)
    assert pi(3.0) == 5.0
    assert PiFunction(-3.0, 1.0).lipschitz == 3.0


# -- nonlocal operators -----------------------------------------------------

OPS = [NonlocalOp("sign_nonlocal"), NonlocalOp("sign_local"), NonlocalOp("zero")]


def _field(seed, n=32, scale=1.0):
    return np.random.default_rng(seed).normal(scale=scale, size=n)


@pytest.mark.parametrize("op", OPS, ids=lambda o: o.kind)
@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eps=eps_st, scale=st.floats(1e-4, 1e3))
def test_nonlocal_properties(op, seed, eps, scale):
    dV = 1.0 / 32
    u, v = _field(seed, scale=scale), _field(seed + 1, scale=scale)

    def nh(w):
        return math.sqrt(np.sum(w * w) * dV)

    Ju, Jv = nonlocal_resolvent(op, eps, u, dV), nonlocal_resolvent(op, eps, v, dV)
    assert nh(Ju - Jv) <= nh(u - v) * (1 + 1e-12)
    Au, Av = nonlocal_yosida(op, eps, u, dV), nonlocal_yosida(op, eps, v, dV)
    assert np.allclose(Au, (u - Ju) / eps, rtol=1e-12, atol=1e-12 * max(1.0, scale) / eps)
    assert nh(Au - Av) <= nh(u - v) / eps * (1 + 1e-9)
    assert nh(Au) <= growth_constant(op, 1.0) * (1 + nh(u)) + 1e-12
    # monotone
    assert np.sum((Au - Av) * (u - v)) * dV >= -1e-9 * nh(u - v) ** 2 / eps


def test_nonlocal_zero_maps_zero():
    for op in OPS:
        z = np.zeros(8)
        assert np.all(nonlocal_resolvent(op, 0.1, z, 0.125) == 0)
        assert np.all(nonlocal_yosida(op, 0.1, z, 0.125) == 0)


def test_sign_nonlocal_values():
    op = NonlocalOp("sign_nonlocal")
    v = np.array([3.0, 4.0])
    dV = 1.0
    assert np.allclose(nonlocal_yosida(op, 0.1, v, dV), v / 5.0)
    assert np.allclose(nonlocal_resolvent(op, 1.0, v, dV), v * 0.8)
    assert np.allclose(nonlocal_yosida(op, 10.0, v, dV), v / 10.0)
    assert nonlocal_potential(op, v, dV) == pytest.approx(5.0)


def test_sign_local_values():
    op = NonlocalOp("sign_local")
    v = np.array([-2.0, 0.05, 0.5])
    assert np.allclose(nonlocal_resolvent(op, 0.1, v, 1.0), [-1.9, 0.0, 0.4])
    assert np.allclose(nonlocal_yosida(op, 0.1, v, 1.0), [-1.0, 0.5, 1.0])


def test_sign_local_growth_constant_needs_volume():
    # for |Omega| = 4 the unit-bounded sign has H norm 2 at v = 0+, above 1 * (1 + 0)
    op = NonlocalOp("sign_local")
    v = np.full(4, 1e-3)
    a = nonlocal_yosida(op, 1e-6, v, 1.0)
    assert math.sqrt(np.sum(a * a)) == pytest.approx(2.0)
    assert growth_constant(op, 4.0) == 2.0


@pytest.mark.parametrize("op", OPS[:2], ids=lambda o: o.kind)
def test_nonlocal_jacobian_matches_finite_differences(op):
    rng = np.random.default_rng(3)
    dV = 0.05
    for eps in (1e-2, 10.0):
        v = rng.normal(size=20)
        v[np.abs(v) < 0.05] = 0.5  # keep clear of sign_local kinks
        d = rng.normal(size=20)
        diag, r1 = nonlocal_yosida_jacobian(op, eps, v, dV)
        jd = diag * d
        if r1 is not None:
            c, w = r1
            jd = jd - c * w * np.sum(w * d) * dV
        h = 1e-7
        fd = (nonlocal_yosida(op, eps, v + h * d, dV) - nonlocal_yosida(op, eps, v - h * d, dV)) / (2 * h)
        assert np.allclose(jd, fd, rtol=1e-5, atol=1e-6)
