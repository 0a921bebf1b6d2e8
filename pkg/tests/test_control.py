import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asgffr.control import (AsgInputs, AsgParams, AsgState, ControllerLoop, apply_power_limit,
                            asg_step, compute_sensitivity, feed_forward, governor_step,
                            grid_power_base, lv_droop_response, market_power_base, simulate_asg,
                            vsm_step)
from asgffr.errors import ConfigError

P = AsgParams()


def euler_oracle(params, f_mv, f_ref, dt, alpha=1.0, sub=20):
    """Independent small-step Euler integration of the controller equations
    (rectangular integral, Euler swing, plain deadband)."""
    h = dt / sub
    integ, w, p_mea = 0.0, 1.0, 0.0
    lo, hi = params.omega_band
    out = []
    for fm, fr in zip(f_mv, f_ref):
        for _ in range(sub):
            e = fr - w
            integ_new = integ + params.Kigov * e * h
            raw = params.Kpgov * e + integ_new
            if abs(raw) > params.Plim and raw * e > 0:
                integ_new = integ
            p_gov = max(-params.Plim, min(params.Plim, params.Kpgov * e + integ_new))
            integ = integ_new
            p_ff = max(-params.Plim, min(params.Plim, (fm - 1.0) / params.R + p_gov))
            w = min(hi, max(lo, w + h * (p_ff - p_mea - params.Dp * (w - 1.0)) / params.Ta))
            dev = (fm - 1.0) * params.f0 if params.deadband_signal == "mv" else (w - 1) * params.f_lv_nom
            p = -params.Kpf * alpha * (w - 1.0) if abs(dev) >= params.deadband else 0.0
            p_mea = -p
        out.append(p * params.Prated)
    return np.array(out)


# ---------------------------------------------------------------------------
# parameters

@pytest.mark.parametrize("field,value", [("R", 0.0), ("Ta", 0.0), ("Plim", -1.0),
                                         ("deadband", -0.1), ("Kpgov", -1.0), ("Prated", -1.0),
                                         ("f0", 0.0), ("Kigov", math.nan)])
def test_params_reject_invalid(field, value):
    with pytest.raises(ConfigError):
        AsgParams(**{field: value})


def test_params_reject_unknown_gate_signal_and_bad_hysteresis():
    with pytest.raises(ConfigError):
        AsgParams(deadband_signal="both")
    with pytest.raises(ConfigError):
        AsgParams(gate_hysteresis=0.3)


def test_omega_band_is_grid_code_band():
    lo, hi = P.omega_band
    assert lo * 50 == pytest.approx(47.5)
    assert hi * 50 == pytest.approx(51.5)


# ---------------------------------------------------------------------------
# governor

def test_governor_zero_error_gives_zero():
    p, st_ = governor_step(AsgState(), 1.0, 1.0, P, 0.01)
    assert p == 0.0 and st_.gov_integrator == 0.0


def test_governor_single_step_trapezoidal():
    # proportional 421 * 0.001 plus trapezoid 1287 * 0.01 * (0 + 0.001) / 2
    p, st_ = governor_step(AsgState(), 1.001, 1.0, P, 0.01)
    assert p == pytest.approx(0.421 + 0.006435, rel=1e-12)
    assert st_.gov_error == pytest.approx(0.001)


def test_governor_constant_error_integral_matches_closed_form():
    prm = P.with_updates(Plim=10.0)
    st_ = AsgState(gov_error=0.001)  # error already present before t = 0
    for _ in range(100):
        p, st_ = governor_step(st_, 1.001, 1.0, prm, 0.01)
    assert st_.gov_integrator == pytest.approx(1287 * 0.001 * 1.0, rel=1e-12)
    assert p == pytest.approx(1.287 + 0.421, rel=1e-12)


def test_governor_anti_windup_freezes_integrator_when_saturated():
    st_ = AsgState()
    for _ in range(500):
        p, st_ = governor_step(st_, 1.01, 1.0, P, 0.01)
        assert abs(p) <= P.Plim
    assert st_.gov_integrator < P.Plim  # no windup beyond the limit
    # reversing the error unsaturates immediately
    p, _ = governor_step(st_, 0.99, 1.0, P, 0.01)
    assert p == -P.Plim or p < 0


def test_governor_rejects_non_finite():
    with pytest.raises(ValueError):
        governor_step(AsgState(), math.nan, 1.0, P, 0.01)
    with pytest.raises(ValueError):
        governor_step(AsgState(), 1.0, 1.0, P, 0.0)


# ---------------------------------------------------------------------------
# feed-forward, limit

@pytest.mark.parametrize("df,pg,expected", [(0.0, 0.0, 0.0), (-0.004, 0.0, -0.2), (0.01, 0.1, 0.6)])
def test_feed_forward_examples(df, pg, expected):
    assert feed_forward(df, pg, P) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("raw,expected", [(0.3, 0.3), (1.7, 1.0), (-2.4, -1.0)])
def test_power_limit_examples(raw, expected):
    assert apply_power_limit(raw, P) == expected


# ---------------------------------------------------------------------------
# VSM block

def test_vsm_equilibrium_is_fixed_point():
    assert vsm_step(AsgState(), 0.2, 0.2, P, 0.01) == 1.0


def test_vsm_steady_state_and_time_constant():
    dt, w = 0.01, AsgState()
    tau = P.Ta / P.Dp
    traj = []
    for _ in range(int(round(10 * tau / dt))):
        w = AsgState(omega=vsm_step(w, 0.1, 0.0, P, dt))
        traj.append(w.omega - 1.0)
    ss = 0.1 / P.Dp
    assert traj[-1] == pytest.approx(ss, rel=1e-3)
    t = dt * np.arange(1, len(traj) + 1)
    np.testing.assert_allclose(traj, ss * (1 - np.exp(-t / tau)), rtol=0, atol=1e-10)


def test_vsm_steady_state_within_one_percent_after_five_time_constants():
    dt, st_ = 0.01, AsgState()
    for _ in range(int(round(5 * P.Ta / P.Dp / dt)) + 1):
        st_ = AsgState(omega=vsm_step(st_, 0.05, 0.0, P, dt))
    assert (st_.omega - 1.0) == pytest.approx(0.05 / P.Dp, rel=0.01)


def test_vsm_is_fourth_order_alone():
    def final(dt):
        st_ = AsgState()
        for _ in range(int(round(1.0 / dt))):
            st_ = AsgState(omega=vsm_step(st_, 0.1, 0.0, P, dt))
        return st_.omega - 1.0
    exact = 0.1 / P.Dp * (1 - math.exp(-P.Dp / P.Ta))
    e1, e2 = abs(final(0.1) - exact), abs(final(0.05) - exact)
    assert 3.5 < math.log2(e1 / e2) < 4.5


def test_vsm_guard_and_clamp():
    with pytest.raises(ValueError):
        vsm_step(AsgState(), 0.0, 0.0, P, P.Ta / 10 * 1.01)
    w = AsgState()
    for _ in range(2000):
        w = AsgState(omega=vsm_step(w, 1.0, 0.0, P, 0.01))
    assert w.omega == pytest.approx(P.omega_band[1])


# ---------------------------------------------------------------------------
# LV droop

def test_droop_examples():
    assert lv_droop_response(1 + 0.1 / 50, 1.0, P) == 0.0
    assert lv_droop_response(1.0, 0.3, P) == 0.0
    assert lv_droop_response(1.01, 1.0, P) == pytest.approx(-0.004)
    assert lv_droop_response(0.99, 0.5, P) == pytest.approx(0.002)


def test_droop_uses_full_deviation_at_deadband_edge():
    edge = 1 + 0.2 / 50
    assert lv_droop_response(edge, 1.0, P) == pytest.approx(-0.4 * 0.2 / 50)


def test_droop_rejects_alpha_out_of_range():
    with pytest.raises(ValueError):
        lv_droop_response(1.0, 1.5, P)
    with pytest.raises(ValueError):
        AsgInputs(alpha=-0.1)


def test_gate_hysteresis_latches():
    prm = P.with_updates(gate_hysteresis=0.05)
    w = 1 + 0.17 / 50  # between deadband - hysteresis and deadband
    assert lv_droop_response(w, 1.0, prm, was_open=False) == 0.0
    assert lv_droop_response(w, 1.0, prm, was_open=True) != 0.0


# ---------------------------------------------------------------------------
# composed step

def test_equilibrium_step():
    out, st_ = asg_step(AsgState(), AsgInputs(), P, 0.01)
    assert out.p_asg == 0.0 and out.omega_star == 1.0 and st_ == AsgState()


def test_asg_step_sign_convention_under_frequency_injects():
    prm = P.with_updates(deadband_signal="mv")
    st_ = AsgState()
    for _ in range(100):
        out, st_ = asg_step(st_, AsgInputs(f_mv=1 - 0.3 / 60), prm, 0.01)
    assert out.p_asg > 0 and out.omega_star < 1


def test_ramp_response_matches_independent_euler_oracle():
    prm = P.with_updates(deadband_signal="mv", Prated=5.0)
    dt = 0.001
    t = np.arange(int(4.0 / dt)) * dt
    f_mv = 1 - 0.3 / 60 * np.clip((t - 0.5) / 1.0, 0, 1)
    f_ref = np.ones_like(t)
    got = simulate_asg(prm, f_mv, f_ref, dt)["p_asg"]
    ref = euler_oracle(prm, f_mv, f_ref, dt)
    peak = np.max(np.abs(ref))
    assert peak > 0
    assert np.max(np.abs(got - ref)) < 0.01 * peak
    # responds within 2 s of the gate opening (deviation reaches 200 mHz at t = 1.17 s)
    k_open = np.argmax(np.abs(f_mv - 1) * 60 >= 0.2)
    assert np.any(np.abs(got[k_open:k_open + int(2 / dt)]) > 0.5 * peak)
    assert np.all(np.abs(simulate_asg(prm, f_mv, f_ref, dt)["p_ff"]) <= prm.Plim)


def test_alpha_zero_gives_no_power():
    prm = P.with_updates(deadband_signal="mv")
    t = np.arange(400) * 0.01
    f_mv = 1 - 0.3 / 60 * np.clip(t - 0.5, 0, 1)
    assert not np.any(simulate_asg(prm, f_mv, np.ones_like(t), 0.01, alpha=0.0)["p_asg"])


def test_zero_rating_idles():
    prm = P.with_updates(deadband_signal="mv", Prated=0.0)
    f_mv = np.full(300, 1 - 0.5 / 60)
    assert not np.any(simulate_asg(prm, f_mv, np.ones(300), 0.01)["p_asg"])


def test_closed_loop_converges_at_first_order():
    prm = P.with_updates(deadband=0.0)

    def final(dt):
        n = int(round(2.0 / dt))
        t = (np.arange(n) + 0.5) * dt
        f_mv = 1 - 0.3 / 60 * np.sin(np.pi * t)
        f_ref = 1 + 0.1 / 50 * np.sin(2 * np.pi * t)
        return simulate_asg(prm, f_mv, f_ref, dt)["omega"][-1]

    ref = final(0.0001)
    errs = [abs(final(dt) - ref) for dt in (0.005, 0.0025, 0.00125)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 0.8) & (orders < 1.3))


# ---------------------------------------------------------------------------
# properties

inputs = st.lists(st.tuples(st.floats(0.97, 1.03), st.floats(0.97, 1.03)), min_size=1, max_size=60)


@settings(max_examples=60, deadline=None)
@given(inputs, st.floats(0.0, 1.0), st.sampled_from(["lv", "mv"]))
def test_feed_forward_never_exceeds_limit(seq, alpha, signal):
    prm = P.with_updates(deadband_signal=signal)
    st_ = AsgState()
    for fm, fr in seq:
        out, st_ = asg_step(st_, AsgInputs(f_mv=fm, f_lv_ref=fr, alpha=alpha), prm, 0.01)
        assert abs(out.p_ff) <= prm.Plim
        assert abs(out.p_gov) <= prm.Plim
        lo, hi = prm.omega_band
        assert lo <= out.omega_star <= hi


@settings(max_examples=60, deadline=None)
@given(inputs, st.floats(0.0, 1.0))
def test_loop_is_bit_identical_to_step_api(seq, alpha):
    prm = P.with_updates(deadband_signal="mv", Prated=3.0, gate_hysteresis=0.02)
    loop = ControllerLoop(prm, alpha)
    st_ = AsgState()
    for fm, fr in seq:
        out, st_ = asg_step(st_, AsgInputs(f_mv=fm, f_lv_ref=fr, alpha=alpha), prm, 0.01)
        assert loop.step(fm, fr, 0.01) == out.p_asg
        assert loop.state == st_


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-0.199, 0.199), min_size=1, max_size=80))
def test_mv_deadband_interior_gives_zero_power(devs_hz):
    prm = P.with_updates(deadband_signal="mv")
    f_mv = 1 + np.array(devs_hz) / 60
    assert not np.any(simulate_asg(prm, f_mv, np.ones_like(f_mv), 0.01)["p_asg"])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-0.1, 0.1), min_size=1, max_size=80))
def test_lv_deadband_interior_gives_zero_power(shifts_hz):
    # set-point shifts of at most 0.1 Hz keep w* well inside the 0.2 Hz band
    f_ref = 1 + np.repeat(np.array(shifts_hz), 5) / 50
    out = simulate_asg(P, np.ones_like(f_ref), f_ref, 0.01)
    assert np.max(np.abs(out["omega"] - 1)) * 50 < 0.2
    assert not np.any(out["p_asg"])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.22, 0.6))
def test_linear_in_alpha_for_fixed_trajectory(alpha, dev):
    w = 1 - dev / 50
    assert lv_droop_response(w, alpha, P) == pytest.approx(alpha * lv_droop_response(w, 1.0, P))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0.98, 1.02), st.floats(0.98, 1.02)), min_size=1, max_size=30))
def test_deterministic_replay(seq):
    f_mv, f_ref = map(np.array, zip(*seq))
    a = simulate_asg(P, f_mv, f_ref, 0.01)
    b = simulate_asg(P, f_mv, f_ref, 0.01)
    for k in a:
        assert np.array_equal(a[k], b[k])


# ---------------------------------------------------------------------------
# sensitivity and sizing

def test_sensitivity_examples():
    assert compute_sensitivity(-4.0, 100.0, 0.1, 50.0) == pytest.approx(-20.0)
    assert compute_sensitivity(0.0, 100.0, 0.1, 50.0) == 0.0
    assert compute_sensitivity(10.0, 100.0, 0.1, 50.0) == pytest.approx(50.0)
    with pytest.raises(ZeroDivisionError):
        compute_sensitivity(1.0, 100.0, 0.0, 50.0)


def test_market_power_base_maps_full_shift_to_rating():
    prm = P.with_updates(f_lv_nom=60.0)
    base = market_power_base(10.0, prm, 1.0)
    assert 0.4 * (1.0 / 60) * base == pytest.approx(10.0)


def test_grid_power_base_delivers_rating_at_design_rocof():
    # steady ramp of the upstream frequency: droop output approaches the rating
    prm = P.with_updates(deadband_signal="mv", deadband=0.0)
    rocof = 0.05
    prm = prm.with_updates(Prated=grid_power_base(4.0, prm, rocof))
    dt = 0.01
    t = np.arange(int(20 / dt)) * dt
    f_mv = 1 - rocof * t / 60
    p = simulate_asg(prm, f_mv, np.ones_like(t), dt)["p_asg"]
    assert p[-1] == pytest.approx(4.0, rel=0.02)
    with pytest.raises(ConfigError):
        grid_power_base(1.0, prm, 0.0)
