import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropy_phasefield.diagnostics import (
    ENERGY_QUANTITIES,
    LEDGER_COLUMNS,
    StudyError,
    energy_monitor,
    energy_ratio_test,
    entropy_defect,
    eps_study,
    gronwall_bound,
    gronwall_extremal,
    interpolant_gaps,
    ledger_csv,
    log_pair_inequality,
    obstacle_violation,
    parse_ledger_csv,
    step_entropy_defect,
    tau_study,
    verify_trajectory,
)
from entropy_phasefield.grid import GridSpec
from entropy_phasefield.monotone import PiFunction, ScalarGraph, graph_yosida
from entropy_phasefield.scenarios import scenario
from entropy_phasefield.scheme import EpsPolicy, SourceSpec, run


def quiet_run(cfg, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run(cfg, **kw)


# -- Gronwall --------------------------------------------------------------------


def test_gronwall_examples():
    assert gronwall_bound(3.0, [0.0, 0.0, 0.0], 4) == 3.0
    assert gronwall_bound(1.0, [math.log(2)], 2) == pytest.approx(2.0, rel=1e-15)
    assert gronwall_bound(1.0, [5.0], 1) == 1.0
    with pytest.raises(ValueError):
        gronwall_bound(-1.0, [0.1], 1)
    with pytest.raises(ValueError):
        gronwall_bound(1.0, [-0.1], 1)
    with pytest.raises(ValueError):
        gronwall_bound(1.0, [0.1], 3)


@settings(max_examples=200, deadline=None)
@given(a0=st.floats(0, 1e3), b=st.lists(st.floats(0, 2), min_size=1, max_size=30))
def test_gronwall_dominates_recursion(a0, b):
    a = gronwall_extremal(a0, b)
    for m in range(1, len(b) + 2):
        assert a[m - 1] <= gronwall_bound(a0, b, m) * (1 + 1e-12) + 1e-300


def test_gronwall_extremal_recursion():
    # direct oracle: a_m = a0 + sum_{n<m} a_n b_n
    b = [0.5, 0.25, 1.0]
    a = gronwall_extremal(2.0, b)
    assert list(a) == [2.0, 2.0, 3.0, 3.75]


# -- log pairs --------------------------------------------------------------------


def test_log_pair_examples():
    assert log_pair_inequality(1.5, 1.5) == (0.0, 0.0)
    lhs, rhs = log_pair_inequality(2.0, 1.0)
    assert lhs == 1.0 and rhs == pytest.approx(3 * math.log(4), rel=1e-15)
    assert rhs == pytest.approx(4.1589, abs=1e-4)
    with pytest.raises(ValueError):
        log_pair_inequality(0.0, 1.0)


@settings(max_examples=300, deadline=None)
@given(a=st.floats(1e-8, 1e8), b=st.floats(1e-8, 1e8))
def test_log_pair_holds(a, b):
    lhs, rhs = log_pair_inequality(a, b)
    assert lhs <= rhs


def test_log_pair_near_equal():
    for b in (1e-8, 1.0, 1e8):
        a = b * (1 + 1e-12)
        lhs, rhs = log_pair_inequality(a, b)
        assert lhs <= rhs


# -- entropy defect ---------------------------------------------------------------


def test_defect_zero_on_stationary_state():
    g = GridSpec((1.0,), (8,))
    one, zero = g.full(1.0), g.zeros()
    assert entropy_defect(g, one, one, zero, zero, zero, zero, zero, zero, 1e-3, 1.0, True) == 0.0


def test_defect_sees_a_perturbation():
    traj = quiet_run(scenario("local_sign", n=32, N=4))
    rec = traj.steps[1]
    assert step_entropy_defect(traj, 2) <= 1e-8
    bumped = type(rec)(**{**rec.__dict__, "theta": rec.theta + 1e-3})
    assert step_entropy_defect(traj, 2, bumped) >= math.sqrt(traj.tau) * 1e-3 * 0.5


def test_ledger_rows_and_csv():
    traj = quiet_run(scenario("local_sign", n=32, N=4))
    text = ledger_csv(traj.ledger)
    assert text.splitlines()[0] == ",".join(LEDGER_COLUMNS)
    rows = parse_ledger_csv(text)
    assert rows == traj.ledger
    assert all(math.isfinite(v) for r in rows for v in r.values())
    assert [r["step"] for r in rows] == [1, 2, 3, 4]


# -- energy monitor ---------------------------------------------------------------


def test_energy_stationary_constant():
    rep = energy_monitor(quiet_run(scenario("stationary")))
    for k in ("sqrt_tau_max_theta_sq", "max_theta_l1", "max_chi_v_sq", "max_beta_moreau"):
        assert np.all(rep.series[k] == rep.series[k][0])
    for k in ("sqrt_tau_sum_theta_jump_sq", "tau_sum_grad_theta_sq", "tau_sum_chi_rate_sq", "sum_chi_jump_v_sq"):
        assert np.all(rep.series[k] == 0.0)
    assert rep.step_ok.all()


def test_energy_decay_when_decoupled_and_unforced():
    cfg = scenario("smooth_decoupled", n=64, N=40).with_(source=SourceSpec("constant", shape="0"))
    rep = energy_monitor(quiet_run(cfg))
    gs = rep.grad_sq
    assert np.all(np.diff(gs) <= 1e-12 * gs[0])


def test_energy_ratio_under_refinement():
    base = scenario("local_sign", n=32).with_(T=1.0)
    reports = [energy_monitor(quiet_run(base.with_(N=n))) for n in (50, 100, 200)]
    for coarse, fine in zip(reports, reports[1:]):
        res = energy_ratio_test(coarse, fine)
        assert set(res) == set(ENERGY_QUANTITIES)
        assert all(ok for ok, _, _ in res.values()), res


# -- obstacle -----------------------------------------------------------------------


def test_obstacle_zero_for_interior_data():
    cfg = scenario("double_obstacle", n=32, N=5).with_(
        chi0="0.5 + 0.1*cos(pi*x)", pi=PiFunction(0.0, 0.0), ell=0.1, eps_policy=EpsPolicy("fixed", eps=1e-3)
    )
    v, table = obstacle_violation(quiet_run(cfg))
    assert v == 0.0 and table == {1e-3: 0.0}


def test_obstacle_needs_box():
    with pytest.raises(ValueError):
        obstacle_violation(quiet_run(scenario("power", n=16, N=2)))


def test_box_yosida_sign_structure():
    x = np.linspace(-1, 2, 301)
    xi = np.asarray(graph_yosida(ScalarGraph.box(0, 1), 1e-3, x)[0])
    assert np.all(xi[x > 1] > 0) and np.all(xi[x < 0] < 0)
    assert np.all(xi[(x >= 0) & (x <= 1)] == 0)


def test_obstacle_violation_halves():
    cfg = scenario("double_obstacle", n=32, N=10)
    vs = [obstacle_violation(quiet_run(cfg.with_(eps_policy=EpsPolicy("fixed", eps=e))))[0] for e in (1e-3, 5e-4, 2.5e-4)]
    for a, b in zip(vs, vs[1:]):
        assert 0.3 <= b / a <= 0.7


# -- interpolants ---------------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(1, 12), tau=st.floats(1e-3, 1.0))
def test_interpolant_identities(seed, n, tau):
    rng = np.random.default_rng(seed)
    vals = list(rng.normal(size=(n + 1, 5)))
    g = interpolant_gaps(vals, tau)
    assert g["sup_gap"] == pytest.approx(g["max_jump"], rel=1e-13, abs=1e-300)
    assert g["max_jump"] == pytest.approx(g["tau_dt_sup"], rel=1e-13)
    assert g["l2_gap_sq"] == pytest.approx(g["l2_closed"], rel=1e-13)
    assert g["l2_closed"] == pytest.approx(g["l2_dt"], rel=1e-13)
    assert g["sup_gap_sq"] <= g["jump_rate_sum"] * (1 + 1e-13)
    assert g["jump_rate_sum"] == pytest.approx(g["tau_dt_l2"], rel=1e-13)


# -- verification ----------------------------------------------------------------------


def test_verify_passes_and_catches_tampering():
    traj = quiet_run(scenario("local_sign", n=32, N=4))
    assert all(r["ok"] for r in verify_trajectory(traj))
    traj.steps[2].chi[3] += 1e-6
    bad = [r["step"] for r in verify_trajectory(traj) if not r["ok"]]
    assert bad and bad[0] == 3


# -- studies -----------------------------------------------------------------------


def test_study_argument_errors():
    cfg = scenario("smooth_decoupled", n=32)
    with pytest.raises(StudyError, match="at least 3"):
        tau_study(cfg, [0.01, 0.005])
    with pytest.raises(StudyError, match="divide"):
        tau_study(cfg, [0.01, 0.003, 0.001])
    with pytest.raises(StudyError, match="nested"):
        tau_study(cfg, [0.02, 0.0125, 0.01])
    with pytest.raises(StudyError, match="nonincreasing"):
        eps_study(cfg, [1e-3, 1e-2, 1e-4])


def test_tau_study_small():
    cfg = scenario("smooth_decoupled", n=32)
    rep = tau_study(cfg, [0.004, 0.002, 0.001, 0.0005])
    assert rep.orders["chi_C0_V"] >= 0.9
    assert rep.monotone["chi_C0_V"]
    assert "fitted order" in rep.summary()
    assert rep.to_csv().count("\n") == 5


def test_duplicate_entries_flagged():
    cfg = scenario("double_obstacle", n=16, N=5)
    rep = eps_study(cfg, [1e-2, 1e-2, 5e-3, 2.5e-3])
    assert rep.successive["chi_C0_V"][0] == 0.0
    assert any("duplicate" in f for f in rep.flags)
    assert rep.orders["chi_C0_V"] is not None and math.isfinite(rep.orders["chi_C0_V"])
