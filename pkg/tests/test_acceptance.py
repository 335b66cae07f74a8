"""Acceptance criteria 1-9, each at its stated tolerance.

Every test records a pass/fail line (see conftest) before asserting, so the
terminal summary lists all criteria even when some fail.
"""
import math
import os
import time

import numpy as np
import pytest
from scipy.integrate import quad

from omegadiv import BankruptcyRate, ScaleBasis, build_table, laplace_exponent, solve_h, w_q, z_q
from omegadiv.montecarlo import DISCOUNT_WEIGHT, KILLING_CLOCK, SimConfig, simulate_value
from omegadiv.optimizer import a_star, beta_max, g, optimize, sweep_beta
from omegadiv.policy import check_c1_fit, check_transaction_bound, generator_summary, value

Q = 0.025


def test_criterion_1_beta_max(model, omega, record):
    t0 = time.perf_counter()
    t = build_table(model, Q, omega, x_max=10.0, h=1e-3, check=False)
    bm = beta_max(t)
    elapsed = time.perf_counter() - t0
    ok_val = abs(bm - 0.009) <= 1e-3
    ok_time = elapsed < 30
    record(1, "", ok_val and ok_time, f"beta_max={bm:.6f} target 0.009+-1e-3, {elapsed:.1f}s < 30s")
    assert ok_time
    assert ok_val, f"beta_max={bm}"


def test_criterion_2a_interior_at_small_beta(table, record):
    pair, diag = optimize(table, 0.001)
    ok = pair.c1 > 0
    record(2, "a", ok, f"beta=0.001 -> c1*={pair.c1:.6f} ({diag.case})")
    assert ok


def test_criterion_2b_corner_at_beta_002(table, record):
    pair, diag = optimize(table, 0.02)
    ok = pair.c1 == 0.0
    record(2, "b", ok, f"beta=0.02 -> c1*={pair.c1:.6f} ({diag.case}), expected 0")
    assert ok


def test_criterion_2c_sweep_transition(table, record):
    betas = [round(0.001 * k, 12) for k in range(1, 21)]
    rows = sweep_beta(table, betas)
    bm = beta_max(table)
    first_zero = next((b for b, c1, _, _ in rows if c1 == 0.0), None)
    last_pos = max((b for b, c1, _, _ in rows if c1 > 0.0), default=None)
    in_window = first_zero is not None and 0.008 <= first_zero <= 0.010
    brackets = first_zero is not None and last_pos is not None and last_pos < bm <= first_zero + 1e-12
    ok = in_window and brackets
    record(2, "c", ok, f"sweep 0.001..0.020: last interior {last_pos}, first corner {first_zero}, "
                       f"window [0.008, 0.010], beta_max={bm:.6f}")
    assert ok


def test_criterion_3_volterra_fidelity(model, omega, record):
    t1 = solve_h(model, Q, omega, x_max=10.0, h=1e-3)
    t2 = solve_h(model, Q, omega, x_max=10.0, h=5e-4)
    ratio = t1.residual_sup / t2.residual_sup
    ok = t1.residual_sup < 1e-8 and ratio >= 2
    record(3, "", ok, f"residual h=1e-3: {t1.residual_sup:.3g}, h=5e-4: {t2.residual_sup:.3g}, ratio {ratio:.1f}")
    assert ok


def test_criterion_4_parisian(model, record):
    phi = 1.5
    t = build_table(model, Q, BankruptcyRate.parisian(phi, a=-1.0), x_max=6.0, h=1e-3)
    basis = ScaleBasis.from_model(model, Q)
    xs = np.linspace(0, 5, 1001)
    err = np.max(np.abs(t.H(xs) / t.H(0.0) - z_q(basis, phi + Q, xs) / z_q(basis, phi + Q, 0.0)))
    ok = err < 1e-6
    record(4, "", ok, f"max normalised error {err:.3g} < 1e-6")
    assert ok


def test_criterion_5_scale_identities(model, basis, record):
    lt_err = 0.0
    for shift in (0.5, 1.0, 2.0, 5.0, 10.0):
        th = basis.phi_q + shift
        val = quad(lambda x: math.exp(-th * x) * w_q(basis, x), 0, 200, limit=500, epsabs=0, epsrel=1e-12)[0]
        expect = 1 / (laplace_exponent(model, th) - Q)
        lt_err = max(lt_err, abs(val / expect - 1))
    s = 1.525
    ps = basis.phi(s)
    z_err = 0.0
    for x in np.arange(0.1, 5.0001, 0.1):
        rep2 = (s - Q) * quad(lambda y: math.exp(-ps * y) * w_q(basis, x + y), 0, 200, limit=500, epsabs=0, epsrel=1e-13)[0]
        z_err = max(z_err, abs(z_q(basis, s, x) / rep2 - 1))
    dsum = abs(np.sum(basis.residues))
    ok = lt_err < 1e-6 and z_err < 1e-8 and dsum < 1e-10
    record(5, "", ok, f"Laplace rel {lt_err:.2g}, dual Z rel {z_err:.2g}, |sum D| {dsum:.2g}")
    assert ok


def test_criterion_6_first_order_conditions(table, optimum, record):
    pair, diag = optimum
    foc2 = abs(table.dH(pair.c2) - g(table, pair.c1, pair.c2, pair.beta))
    slopes = abs(table.dH(pair.c1) - table.dH(pair.c2)) / table.dH(pair.c2)
    step = 5e-3
    c1 = np.arange(0.0, 1.0 + step / 2, step)
    c2 = np.arange(0.0, 3.0 + step / 2, step)
    den = c2[None, :] - c1[:, None] - pair.beta
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.where(den > 0, (table.H(c2)[None, :] - table.H(c1)[:, None]) / den, np.inf)
    i, j = np.unravel_index(np.argmin(G), G.shape)
    cell = abs(c1[i] - pair.c1) <= step and abs(c2[j] - pair.c2) <= step
    ok = foc2 < 1e-4 and diag.case == "interior" and slopes < 1e-8 and cell
    record(6, "", ok, f"|H'(c2)-g| {foc2:.2g}, slope gap {slopes:.2g}, grid argmin ({c1[i]:.3f}, {c2[j]:.3f}) "
                      f"vs ({pair.c1:.4f}, {pair.c2:.4f})")
    assert ok


def test_criterion_7_verification(model, omega, vt, record):
    fit = check_c1_fit(vt)
    worst = check_transaction_bound(vt, 100_000, seed=0)
    gen = generator_summary(model, omega, Q, vt)
    ok = fit < 1e-3 and worst >= -1e-9 and gen["below_c2_max_scaled_abs"] < 1e-3 and gen["above_c2_max"] <= 1e-4
    record(7, "", ok, f"C1 fit {fit:.2g}, transaction worst {worst:.3g}, generator below {gen['below_c2_max_scaled_abs']:.2g} "
                      f"above max {gen['above_c2_max']:.3g}")
    assert ok


@pytest.mark.slow
def test_criterion_8_monte_carlo(model, omega, table, optimum, record):
    pair = optimum[0]
    workers = min(4, os.cpu_count() or 1)
    x0s = [omega.a / 2, 0.0, pair.c1, 0.5 * (pair.c1 + pair.c2), pair.c2 + 1.0]
    t0 = time.perf_counter()
    worst_z, worst_mode = 0.0, 0.0
    for x0 in x0s:
        v = value(table, pair, x0)
        res = {}
        for mode in (KILLING_CLOCK, DISCOUNT_WEIGHT):
            cfg = SimConfig(n_paths=100_000, dt=1e-3, seed=20240101, mode=mode, workers=workers)
            assert math.exp(-Q * cfg.horizon(Q)) < 1e-6
            res[mode] = simulate_value(model, omega, Q, pair, x0, cfg)
            worst_z = max(worst_z, abs(res[mode].estimate - v) / res[mode].stderr)
        k, w = res[KILLING_CLOCK], res[DISCOUNT_WEIGHT]
        worst_mode = max(worst_mode, abs(k.estimate - w.estimate) / math.hypot(k.stderr, w.stderr))
    elapsed = time.perf_counter() - t0
    ok = worst_z < 3 and worst_mode < 3
    record(8, "", ok, f"max |z| vs analytic {worst_z:.2f}, max mode z {worst_mode:.2f}, {elapsed:.0f}s "
                      f"(target < 300s)")
    assert ok


def test_criterion_9_log_convexity(table, record):
    pos = table.grid > 0
    d2 = np.diff(np.log(table.h_prime[pos]), 2)
    ok = d2.min() >= -1e-8
    record(9, "", ok, f"min second difference of log H' {d2.min():.3g} >= -1e-8")
    assert ok
