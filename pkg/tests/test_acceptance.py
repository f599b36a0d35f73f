"""Acceptance criteria 1-11.

Each test records one PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion is still reported with its measured value.
"""

import math
import time

import numpy as np

from semibohm.bohm import (
    LocalMotionParams,
    bohm_velocity_exact,
    bohm_velocity_wkb,
    continuity_residual,
    equivariance_check,
    extremal_velocities,
    integrate_local,
    local_integrator_options,
    local_trajectory_residual,
    nonclassical_probability,
    sample_initial_positions,
    time_averaged_velocity,
)
from semibohm.eigensolver import ExactSuperposition, richardson_energies, solve_band
from semibohm.husimi import (
    SampledWavefunction,
    accuracy_pair,
    bohm_limit_check,
    classical_form_check,
    classical_window,
    limit_large_lambda,
    limit_small_lambda,
    phase_space_norm,
)
from semibohm.integrate import IntegratorOptions, peak_speed
from semibohm.wells import harmonic, quartic, solve_level
from semibohm.wkb import WKBState, coefficient_presets, make_spec, packet_phase

from conftest import ACCEPTANCE


def record(n, ok, detail):
    ACCEPTANCE.append((n, bool(ok), detail))
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def local_run(chi0, wavelengths=1.0):
    params = LocalMotionParams(chi0, 0.0, 1.0, 1.0)
    t1 = 1.02 * wavelengths * params.lambda0 / params.mean_velocity
    return params, integrate_local(params, t1, local_integrator_options(params))


def test_c01_spike_height():
    start = time.perf_counter()
    params, traj = local_run(0.01)
    _, v_peak = peak_speed(traj, params.velocity)
    elapsed = time.perf_counter() - start
    target = 1.0 / math.tanh(0.005)
    rel = abs(v_peak - target) / target
    record(1, rel < 0.02 and elapsed < 5.0, f"peak {v_peak:.4f} vs coth(chi0/2) = {target:.4f}, rel {rel:.2e}, {elapsed:.2f} s")


def test_c02_time_averaged_velocity():
    devs = {}
    for chi0 in (0.005, 0.01, 0.05, 0.1):
        params, traj = local_run(chi0)
        v_bar = time_averaged_velocity(traj, 0.0, 1.0)
        devs[chi0] = abs(v_bar - math.tanh(chi0)) / math.tanh(chi0)
    worst = max(devs.values())
    record(2, worst < 0.01, "rel dev " + ", ".join(f"chi0={k}: {v:.1e}" for k, v in devs.items()))


def test_c03_implicit_relation():
    params, traj = local_run(0.01)
    t_pass = 1.0 / time_averaged_velocity(traj, 0.0, 1.0)
    ts = np.linspace(0.0, t_pass, 100)
    res = float(np.max(np.abs(local_trajectory_residual(params, traj.dense(ts), ts))))
    record(3, res < 1e-3, f"max normalized residual {res:.2e} over 100 times")


def test_c04_level_accuracy():
    levels = [20, 40, 60, 80, 100, 120]
    start = time.perf_counter()
    hw = harmonic()
    h_wkb = np.array([solve_level(hw, n).energy for n in levels])
    h_num = richardson_energies(hw, levels)
    qw = quartic()
    q_wkb = np.array([solve_level(qw, n).energy for n in levels])
    q_num = richardson_energies(qw, levels)
    elapsed = time.perf_counter() - start
    analytic = np.array(levels) + 0.5
    h_vs_analytic = float(np.max(np.abs(h_wkb - analytic) / analytic))
    h_vs_numerov = float(np.max(np.abs(h_wkb - h_num) / h_num))
    q_rel = np.abs(q_wkb - q_num) / q_num
    ok = h_vs_analytic < 1e-10 and h_vs_numerov < 1e-10 and np.all(q_rel < 1e-3) and elapsed < 30
    record(
        4,
        ok,
        f"harmonic rel err {h_vs_analytic:.1e} (analytic) / {h_vs_numerov:.1e} (Numerov); "
        f"quartic max rel err {q_rel.max():.1e}; {elapsed:.1f} s",
    )


def test_c05_velocity_cross_validation(packet_state, packet_oracle):
    x = np.linspace(*packet_state.interior, 200)
    period = packet_state.level.period
    worst = 0.0
    counted = 0
    for t in np.linspace(0.0, period, 5, endpoint=False):
        rho_bar = packet_state.envelopes(x, t).rho_bar
        vw = bohm_velocity_wkb(packet_state, None, x, t)
        ve = bohm_velocity_exact(packet_oracle, x, t)
        vcl = packet_state.classical_speed(x)
        mask = (rho_bar > 0.1 * np.nanmax(rho_bar)) & (np.abs(ve) > 0.1 * vcl) & np.isfinite(vw) & np.isfinite(ve)
        counted += int(mask.sum())
        worst = max(worst, float(np.max(np.abs(vw[mask] - ve[mask]) / np.abs(ve[mask]))))
    record(5, worst < 0.05 and counted > 0, f"max relative |v_wkb - v_exact| {worst:.3f} at {counted} points")


def test_c06_eigenstate_stasis(hwell):
    worst = 0.0
    for n in (0, 7, 120):
        state = solve_band(hwell, [n])
        psi = ExactSuperposition(state, [1.0])
        grid = state[0].grid
        for t in (0.0, 0.37, 11.0):
            worst = max(worst, float(np.nanmax(np.abs(bohm_velocity_exact(psi, grid, t)))))
    record(6, worst < 1e-10, f"max |v_B| {worst:.1e}")


def test_c07_wave_packet_criterion():
    well = harmonic(half_width=80.0)
    level = solve_level(well, 1000)
    c = coefficient_presets("gaussian_packet", 100, {"sigma_r": 10.0, "theta0": packet_phase(level, well, 0.0)})
    packet = WKBState(make_spec(well, 1000, 100, c), well)
    random = WKBState(make_spec(well, 1000, 100, coefficient_presets("uniform_random_phase", 100, seed=7)), well)
    times = np.linspace(0.0, level.period, 50, endpoint=False)
    reports = [nonclassical_probability(packet, t=t) for t in times]
    p_packet = max(r.probability for r in reports)
    p_random = max(nonclassical_probability(random, t=t).probability for t in times)
    # reported so a grid point that lands on a reflection (packet inside an exclusion zone) is visible
    mass = min(r.interior_mass for r in reports)
    record(7, p_packet < 0.05 and p_random > 0.3, f"packet max {p_packet:.3f} (min interior mass {mass:.3f}), uniform random phase max {p_random:.3f}")


def test_c08_husimi_classical_window(packet_state):
    t = 0.25 * packet_state.level.period
    lo, hi = packet_state.interior
    # the window closes near the turning points; take 20 x where it is open
    fine = np.linspace(lo, hi, 2001)
    open_ = fine[classical_window(packet_state, None, fine).nonempty]
    xs = np.linspace(open_[0], open_[-1], 22)[1:-1]
    win = classical_window(packet_state, None, xs)
    assert np.all(win.nonempty)
    w_err = p_err = 0.0
    for x, lam in zip(xs, win.middle):
        rep = classical_form_check(packet_state, None, float(x), float(lam), t)
        w_err = max(w_err, abs(rep.weight_plus - rep.rho_weight_plus), abs(rep.weight_minus - rep.rho_weight_minus))
        p_err = max(p_err, abs(rep.mean_p_plus_branch / rep.momentum - 1), abs(-rep.mean_p_minus_branch / rep.momentum - 1))
    record(8, w_err < 1e-3 and p_err < 0.01, f"weights abs err {w_err:.1e}, mean momentum rel err {p_err:.1e} at 20 x")


def test_c09_degenerate_limits(packet_state, packet_oracle, hwell):
    sampled = SampledWavefunction.from_superposition(packet_oracle, 0.0, hwell)
    level = packet_state.level
    p_max = math.sqrt(2 * level.energy)
    lam_minus = float(classical_window(packet_state, None, np.array([0.0])).lambda_minus[0])

    lam = lam_minus / 50
    xs = np.linspace(*packet_state.interior, 41)
    pm = p_max + 3 / lam
    X, P = np.meshgrid(xs, np.linspace(-pm, pm, 81), indexing="ij")
    small = limit_small_lambda(sampled, X, P, lam, lambda_minus=lam_minus).relative_deviation()

    lam = 10 * level.span
    X, P = np.meshgrid(np.linspace(-2.5 * lam, 2.5 * lam, 41), np.linspace(-p_max - 3 / lam, p_max + 3 / lam, 81), indexing="ij")
    large = limit_large_lambda(sampled, X, P, lam, span=level.span).relative_deviation()
    record(9, small < 0.1 and large < 0.1, f"small-lambda (lambda-/50) {small:.3f}, large-lambda (10 span) {large:.4f}")


def test_c10_bohm_limit(packet_state, packet_oracle):
    lam_minus = float(classical_window(packet_state, None, np.array([0.0])).lambda_minus[0])
    lams = lam_minus / np.array([2.0, 5.0, 20.0])
    rows = []
    ok = True
    for ref in ("wkb", "exact"):
        rep = bohm_limit_check(packet_state, None, 0.0, 0.0, lams, reference=ref, psi=packet_oracle)
        ok &= bool(np.all(np.diff(rep.deviations) < 0)) and rep.relative[-1] < 0.02
        rows.append(f"{ref}: " + ", ".join(f"{d:.1e}" for d in rep.relative))
    record(10, ok, "relative deviations " + "; ".join(rows))


def test_c11_flow_correctness(packet_state, packet_oracle, hwell):
    rng = np.random.default_rng(2024)
    lo, hi = packet_state.interior
    period = packet_state.level.period

    # continuity equation at 10^3 random points
    xr = rng.uniform(lo, hi, 1000)
    tr = rng.uniform(0, period, 1000)
    r, s = continuity_residual(packet_oracle, xr, tr)
    big = s > 1e-6 * np.max(s)
    cont = float(np.max(np.abs(r[big]) / s[big]))

    # equivariance for a two-level ensemble over T/8
    states = solve_band(hwell, [100, 101])
    psi = ExactSuperposition(states, np.full(2, 1 / math.sqrt(2)))
    grid = states[0].grid
    p_max = math.sqrt(2 * solve_level(hwell, 101).energy)
    opts = IntegratorOptions(rtol=1e-8, atol=1e-10, length_scale=2 * math.pi / p_max, speed_floor=p_max)
    x0 = np.sort(sample_initial_positions(grid, psi.density(grid, 0.0), 10_000, seed=1))
    t1 = solve_level(hwell, 100).period / 8
    rep = equivariance_check(x0, lambda x, t: bohm_velocity_exact(psi, x, t), 0.0, t1, grid, psi.density(grid, t1), opts)
    no_cross = bool(np.all(np.diff(rep.positions) >= 0))

    # extremal velocity product
    xs = rng.uniform(lo, hi, 500)
    ts = rng.uniform(0, period, 500)
    vm, vp = extremal_velocities(packet_state, None, xs, ts)
    vcl = packet_state.classical_speed(xs)
    fin = np.isfinite(vp)
    prod = float(np.max(np.abs(vm[fin] * vp[fin] / vcl[fin] ** 2 - 1)))

    # phase-space normalization of Q for an n = 20 eigenstate
    eig = ExactSuperposition(solve_band(hwell, [20]), [1.0])
    sampled = SampledWavefunction.from_superposition(eig, 0.0, hwell)
    norm = abs(phase_space_norm(sampled, 1.0, 1.0, math.sqrt(41.0)) - 1)

    # retrodictive accuracy product
    acc = max(abs(a.dx * a.dp / 0.5 - 1) for a in map(accuracy_pair, np.exp(rng.uniform(-6, 6, 200))))

    ok = cont < 1e-4 and rep.ks < 0.02 and rep.excluded == 0 and no_cross and prod < 1e-12 and norm < 1e-6 and acc < 1e-15
    record(
        11,
        ok,
        f"continuity {cont:.1e}, KS {rep.ks:.4f} (excluded {rep.excluded}), no-crossing {no_cross}, "
        f"v+v- {prod:.1e}, |int Q - 1| {norm:.1e}, dx dp {acc:.1e}",
    )
