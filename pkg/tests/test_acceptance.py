"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v -s`` to see the lines inline; they are
also collected in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from asgffr.cli import main
from asgffr.control import AsgInputs, AsgParams, AsgState, asg_step, simulate_asg, vsm_step
from asgffr.finance import (FinanceAssumptions, break_even_year, build_schedule, irr,
                            irr_vs_capital_cost, npv)
from asgffr.grid.dynamics import AsgAttachment, DisturbanceSpec, run
from asgffr.grid.network import build_ieee9
from asgffr.market import (ClearingPrices, MarketDataset, RegulationConfig,
                           generate_synthetic_regd, mileage, monthly_revenue, regulation_credit,
                           simulate_regulation)
from asgffr.modal import RingdownWindow, damping_ratio, mode_frequency, prony_fit


def check(acceptance, number, checks, elapsed, budget):
    """Record the criterion and fail the test if any sub-check failed."""
    ok_runtime = elapsed < budget
    parts = [f"{name}={'ok' if ok else 'FAIL'} ({detail})" for name, ok, detail in checks]
    parts.append(f"runtime {elapsed:.2f}s < {budget:g}s: {'ok' if ok_runtime else 'FAIL'}")
    passed = all(ok for _, ok, _ in checks) and ok_runtime
    acceptance(number, passed, "; ".join(parts))
    assert passed, "; ".join(p for p in parts if "FAIL" in p)


def test_criterion_01_published_modes_self_consistent(acceptance):
    t0 = time.perf_counter()
    f1, z1 = mode_frequency(0.578), damping_ratio(-0.369, 0.578)
    z2 = damping_ratio(-0.507, 0.462)
    checks = [("f(base)", abs(f1 - 0.092) <= 1e-3, f"{f1:.4f} Hz"),
              ("zeta(base)", abs(z1 - 53.86) <= 0.1, f"{z1:.2f} %"),
              ("zeta(10MW)", abs(z2 - 73.94) <= 0.1, f"{z2:.2f} %")]
    check(acceptance, 1, checks, time.perf_counter() - t0, 1.0)


def test_criterion_02_prony_oracle(acceptance):
    t0 = time.perf_counter()
    dt = 0.02
    t = np.arange(1500) * dt
    truth = [(1.0, -0.3, 0.6, 0.2), (0.5, -0.8, 2.5, -1.0)]
    y = sum(a * np.exp(s * t) * np.cos(w * t + p) for a, s, w, p in truth)

    def worst(signal):
        got = sorted(prony_fit(RingdownWindow(signal, dt), 4), key=lambda m: m.omega)
        return max(abs(getattr(m, k) / ref - 1)
                   for m, tr in zip(got, truth)
                   for k, ref in zip(("A", "sigma", "omega", "phi"), tr))

    clean = worst(y)
    noisy = max(worst(y + 1e-3 * np.random.default_rng(s).standard_normal(t.size))
                for s in range(3))
    checks = [("noiseless", clean < 1e-6, f"max rel err {clean:.1e}"),
              ("noise 1e-3", noisy < 0.01, f"max rel err {noisy:.1e}")]
    check(acceptance, 2, checks, time.perf_counter() - t0, 5.0)


def test_criterion_03_dynamic_trends(acceptance, grid_study):
    outcomes, elapsed = grid_study
    t_n = [o.metrics.t_nadir for o in outcomes]
    f_n = [o.metrics.f_nadir for o in outcomes]
    e = [o.metrics.delta_E for o in outcomes]
    zeta = [o.dominant.zeta for o in outcomes]
    fm = [o.dominant.f_mode for o in outcomes]

    def inc(x):
        return all(a < b for a, b in zip(x, x[1:]))

    checks = [("t_nadir increasing", inc(t_n), " < ".join(f"{v:.3f}" for v in t_n)),
              ("f_nadir non-decreasing", all(a <= b for a, b in zip(f_n, f_n[1:])),
               " <= ".join(f"{v:.4f}" for v in f_n)),
              ("dE increasing", inc(e), " < ".join(f"{v:.3f}" for v in e)),
              ("zeta increasing", inc(zeta), " < ".join(f"{v:.1f}" for v in zeta)),
              ("f_mode decreasing", inc(fm[::-1]), " > ".join(f"{v:.4f}" for v in fm))]
    check(acceptance, 3, checks, elapsed, 120.0)


def test_criterion_04_zero_rating_equivalence(acceptance):
    t0 = time.perf_counter()
    model, d = build_ieee9(), DisturbanceSpec()
    base = run(model, d, None, 0.005, 60.0)
    att = AsgAttachment(AsgParams(deadband_signal="mv", gate_hysteresis=0.02, Prated=0.0), bus=5)
    zero = run(model, d, att, 0.005, 60.0)
    same = all(np.array_equal(getattr(base, k), getattr(zero, k))
               for k in ("bus_freq", "bus_angle", "gen_angle", "gen_speed", "p_asg"))
    check(acceptance, 4, [("bit-identical", same, "all series")], time.perf_counter() - t0, 60.0)


def test_criterion_05_market_formulas(acceptance):
    t0 = time.perf_counter()
    m = mileage([0, 0.5, -0.5, 1])
    c = regulation_credit(3.0, 0.76, 10.0, 2.0, 5.0)
    asg = AsgParams()
    sig = generate_synthetic_regd(2023, 30 * 86400.0)
    data = MarketDataset(sig, ClearingPrices.constant(0.5, 0.05))
    dead = monthly_revenue(data, RegulationConfig(5.0, 0.1, deadband=1.0), asg).total
    worst_ramp, worst_sat = 0.0, 0.0
    for rating in (2.0, 5.0, 10.0):
        cfg = RegulationConfig(rating, 0.1)
        p = simulate_regulation(sig, cfg, asg)
        worst_ramp = max(worst_ramp, np.max(np.abs(np.diff(np.r_[0.0, p]))) - 0.1 * 2.0)
        worst_sat = max(worst_sat, np.max(np.abs(p)) - rating)
    checks = [("mileage", m == 3.0, repr(float(m))), ("credit", c == 45.6, repr(c)),
              ("full deadband", dead == 0.0, f"{dead} $"),
              ("ramp limit", worst_ramp <= 1e-9, f"max excess {worst_ramp:.1e} MW"),
              ("saturation", worst_sat <= 0.0, f"max excess {worst_sat:.1e} MW")]
    check(acceptance, 5, checks, time.perf_counter() - t0, 10.0)


def test_criterion_06_finance(acceptance):
    t0 = time.perf_counter()
    a = FinanceAssumptions(revenue0=81_578.0)
    s = build_schedule(a)
    npv6, npv20 = npv(s, 0.06), npv(s, 0.20)
    rates = np.linspace(0.0, 0.5, 51)
    curve = [npv(s, r) for r in rates]
    irr1 = irr(s)
    irr5 = dict(irr_vs_capital_cost(a, [5.0]))[5.0]
    rev15 = float(s.revenue[-1])
    be = [break_even_year(build_schedule(a.with_updates(cost_factor=k))) for k in (1, 2, 3)]
    checks = [("NPV(6%)", abs(npv6 / 1_016_500 - 1) <= 0.10, f"{npv6:,.0f} vs 1,016,500 +/-10%"),
              ("NPV(20%)", abs(npv20 / 885_360 - 1) <= 0.10, f"{npv20:,.0f} vs 885,360 +/-10%"),
              ("NPV decreasing", all(x > y for x, y in zip(curve, curve[1:])), "i in [0, 0.5]"),
              ("IRR 1x", abs(irr1 - 0.80) <= 0.05, f"{irr1:.4f} vs 0.80 +/-0.05"),
              ("IRR 5x", irr5 > 0.13, f"{irr5:.4f} > 0.13"),
              ("revenue year 15", abs(rev15 / 145_000 - 1) <= 0.05, f"{rev15:,.0f} vs 145,000 +/-5%"),
              ("break-even 1-3x", all(y is not None and 2 <= y <= 5 for y in be), f"years {be}")]
    check(acceptance, 6, checks, time.perf_counter() - t0, 1.0)


def test_criterion_07_npv_irr_oracles(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst_npv, worst_root = 0.0, 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 31))
        cf = np.r_[-rng.uniform(1e3, 1e6), rng.uniform(0.0, 2e5, n - 1)]
        rate = float(rng.uniform(-0.5, 1.0))
        direct = math.fsum(v / (1.0 + rate) ** k for k, v in enumerate(cf))
        worst_npv = max(worst_npv, abs(npv(cf, rate) - direct) / max(abs(direct), 1e-300))
        if cf[1:].sum() > 0:
            try:
                r = irr(cf)
            except ArithmeticError:
                continue
            worst_root = max(worst_root, abs(npv(cf, r)) / abs(cf[0]))
    r10 = irr([-100.0, 110.0])
    checks = [("brute-force npv", worst_npv < 1e-9, f"max rel err {worst_npv:.1e}"),
              ("npv(irr) = 0", worst_root < 1e-6, f"max |npv|/|cf0| {worst_root:.1e}"),
              ("[-100, 110]", abs(r10 - 0.10) < 1e-10, f"{r10!r}")]
    check(acceptance, 7, checks, time.perf_counter() - t0, 5.0)


def test_criterion_08_fitting_self_recovery(acceptance, noiseless_fit):
    truth, problem, res, elapsed = noiseless_fit
    ref = np.array([truth.Kpgov, truth.Kigov, truth.Ta, truth.Dp, truth.Kpf])
    rel = np.abs(res.theta / ref - 1)
    rms_ratio = res.rmsd / problem.signal_rms
    checks = [("parameters within 2%", bool(np.all(rel < 0.02)), f"max rel err {rel.max():.1e}"),
              ("RMSD < 1e-6 of signal RMS", rms_ratio < 1e-6, f"{rms_ratio:.1e}")]
    check(acceptance, 8, checks, elapsed, 60.0)


def test_criterion_09_control_contracts(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    prm = AsgParams(deadband_signal="mv")
    worst_ff = 0.0
    for _ in range(200):
        st = AsgState()
        for fm, fr in rng.uniform(0.97, 1.03, size=(50, 2)):
            out, st = asg_step(st, AsgInputs(f_mv=fm, f_lv_ref=fr), prm, 0.01)
            worst_ff = max(worst_ff, abs(out.p_ff))
    interior = 0
    for _ in range(100):
        f_mv = 1 + rng.uniform(-0.199, 0.199, 200) / 60
        interior += int(np.count_nonzero(simulate_asg(prm, f_mv, np.ones(200), 0.01)["p_asg"]))
    st = AsgState()
    for _ in range(int(round(5 * prm.Ta / prm.Dp / 0.01)) + 1):
        st = AsgState(omega=vsm_step(st, 0.05, 0.0, prm, 0.01))
    ss_err = abs((st.omega - 1) / (0.05 / prm.Dp) - 1)

    loop = prm.with_updates(deadband=0.0, deadband_signal="lv")

    def final(dt):
        n = int(round(2.0 / dt))
        tt = (np.arange(n) + 0.5) * dt
        return simulate_asg(loop, 1 - 0.3 / 60 * np.sin(np.pi * tt),
                            1 + 0.1 / 50 * np.sin(2 * np.pi * tt), dt)["omega"][-1]

    ref = final(0.0001)
    e1, e2 = abs(final(0.005) - ref), abs(final(0.0025) - ref)
    order = math.log2(e1 / e2)
    checks = [("|p_ff| <= Plim", worst_ff <= prm.Plim, f"max {worst_ff:.3f}"),
              ("deadband interior", interior == 0, f"{interior} nonzero samples"),
              ("VSM steady state", ss_err < 0.01, f"rel err {ss_err:.1e}"),
              ("closed-loop order ~1", 0.8 < order < 1.3, f"{order:.2f}")]
    check(acceptance, 9, checks, time.perf_counter() - t0, 30.0)


def test_criterion_10_pipeline_determinism(acceptance, tmp_path):
    t0 = time.perf_counter()
    codes = [main(["pipeline", "--out", str(tmp_path / name)]) for name in ("a", "b")]

    def tree(root):
        return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
                if p.is_file()}

    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    checks = [("exit codes", codes == [0, 0], str(codes)),
              ("byte-identical", a == b and len(a) > 0, f"{len(a)} files")]
    # no runtime budget is stated for this criterion; the pipeline budget is 5 min per run
    check(acceptance, 10, checks, time.perf_counter() - t0, 600.0)
