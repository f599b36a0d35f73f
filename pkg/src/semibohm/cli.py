"""Command-line front end: one subcommand per figure or analysis.

Each command computes all of its outputs in memory first and only then
writes them (CSV files plus a ``manifest.json`` sidecar), so a run that fails
validation leaves the output directory untouched.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bohm import (
    LocalMotionParams,
    balanced_probability,
    bohm_velocity_exact,
    continuity_residual,
    equivariance_check,
    extremal_velocities,
    classicality_measure,
    fraction_of_time_below,
    integrate_local,
    local_integrator_options,
    local_trajectory_residual,
    nonclassical_probability,
    sample_initial_positions,
    time_averaged_velocity,
    wkb_density_scale,
)
from .config import ConfigError, ScenarioConfig, config_from_dict, load_config
from .eigensolver import EigensolverError, ExactSuperposition, richardson_energies, solve_band
from .husimi import (
    CoherentStateParams,
    SampledWavefunction,
    accuracy_pair,
    bohm_limit_check,
    classical_form_check,
    classical_window,
    coherent_wavefunction,
    husimi_grid_exact,
    husimi_wkb,
    limit_large_lambda,
    limit_small_lambda,
    phase_space_norm,
)
from .integrate import IntegrationError, IntegratorOptions
from .wells import (
    PotentialWell,
    QuadratureError,
    WellError,
    harmonic,
    harmonic_cubic,
    quartic,
    quantization_residual,
    read_potential_csv,
    solve_level,
)
from .wkb import SpecError, SuperpositionSpec, WKBState, coefficient_presets, envelope_sums, packet_phase

COMMANDS = ("levels", "fig-rho", "fig-trajectory", "husimi", "equivariance", "property-suite")


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# run products


@dataclass
class RunOutput:
    files: dict[str, str] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    ok: bool = True

    def csv(self, name: str, header: list[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self.files[name] = buf.getvalue()

    def json(self, name: str, data) -> None:
        self.files[name] = json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v).__name__)


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_hash: str
    version: str
    seeds: dict
    wall_clock: float
    outputs: dict

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def write_outputs(out_dir: Path, command: str, cfg: ScenarioConfig, result: RunOutput, wall_clock: float) -> RunManifest:
    out_dir.mkdir(parents=True, exist_ok=True)
    checksums = {}
    for name in sorted(result.files):
        text = result.files[name]
        (out_dir / name).write_text(text)
        checksums[name] = sha256_text(text)
    manifest = RunManifest(command, cfg.hash(), __version__, {"seed": cfg.seed, **cfg.seeds()}, round(wall_clock, 6), checksums)
    (out_dir / "manifest.json").write_text(manifest.to_json())
    return manifest


# ---------------------------------------------------------------------------
# construction from config


def build_well(cfg: ScenarioConfig) -> PotentialWell:
    w, u = cfg.well, cfg.units
    kw = {"mass": u.mass, "hbar": u.hbar}
    if w.kind == "harmonic":
        return harmonic(w.omega, half_width=w.half_width or 60.0, **kw)
    if w.kind == "quartic":
        return quartic(w.coefficient, half_width=w.half_width or 10.0, **kw)
    if w.kind == "harmonic_cubic":
        return harmonic_cubic(w.cubic, **kw)
    return read_potential_csv(w.csv, **kw)


def build_spec(cfg: ScenarioConfig, well: PotentialWell, strict: bool = True) -> SuperpositionSpec:
    s = cfg.spec
    level = solve_level(well, s.center_level)
    if s.coefficients is not None:
        c = np.array([complex(re, im) for re, im in s.coefficients])
    elif s.preset == "eigenstate":
        c = np.zeros(s.band + 1, dtype=complex)
        c[s.band // 2] = 1.0
    elif s.preset == "gaussian_packet":
        params = {}
        if s.sigma_r is not None:
            params["sigma_r"] = s.sigma_r
        if s.theta0 is not None:
            params["theta0"] = s.theta0
        elif s.x_center is not None:
            params["theta0"] = packet_phase(level, well, s.x_center, s.direction)
        c = coefficient_presets("gaussian_packet", s.band, params)
    else:
        c = coefficient_presets("uniform_random_phase", s.band, seed=cfg.seeds()["spec"])
    return SuperpositionSpec(s.center_level, s.band, c, level, strict=strict)


def build_oracle(spec: SuperpositionSpec, well: PotentialWell) -> ExactSuperposition:
    states = solve_band(well, list(spec.levels))
    return ExactSuperposition(states, spec.coefficients, hbar=well.hbar, mass=well.mass)


# ---------------------------------------------------------------------------
# commands


def cmd_levels(cfg: ScenarioConfig) -> RunOutput:
    well = build_well(cfg)
    levels = sorted(cfg.analysis.levels.levels)
    out = RunOutput()
    wkb = [solve_level(well, n) for n in levels]
    exact = richardson_energies(well, levels) if cfg.oracle else None
    rows = []
    for k, (n, lv) in enumerate(zip(levels, wkb)):
        if exact is not None:
            e_ex = float(exact[k])
            rel = abs(lv.energy - e_ex) / abs(e_ex)
        else:
            e_ex = rel = float("nan")
        rows.append((n, lv.energy, e_ex, rel, lv.turning_left, lv.turning_right, lv.period))
    out.csv("levels.csv", ["n", "E_wkb", "E_exact", "rel_err", "a_minus", "a_plus", "T"], rows)
    out.summary = {"levels": len(rows), "max_rel_err": max((r[3] for r in rows), default=float("nan"))}
    return out


def cmd_fig_rho(cfg: ScenarioConfig) -> RunOutput:
    well = build_well(cfg)
    spec = build_spec(cfg, well)
    state = WKBState(spec, well)
    period = spec.level.period
    a, b = state.turning
    x = np.linspace(a, b, cfg.analysis.fig_rho.n_points)
    out = RunOutput()
    report = []
    for k, frac in enumerate(cfg.analysis.fig_rho.times):
        t = frac * period
        env = state.envelopes(x, t)
        out.csv(f"rho_{k:03d}.csv", ["x", "rho_plus", "rho_minus", "rho_bar"], zip(x, env.rho_plus, env.rho_minus, env.rho_bar))
        report.append(
            {
                "file": f"rho_{k:03d}.csv",
                "t_over_T": frac,
                "t": t,
                "balanced_probability": balanced_probability(state, None, t),
                **{k: v for k, v in dataclasses.asdict(nonclassical_probability(state, None, t)).items() if k != "probability"},
                "nonclassical_probability": nonclassical_probability(state, None, t).probability,
            }
        )
    out.json("fig_rho.json", report)
    out.summary = {"snapshots": len(report)}
    return out


def cmd_fig_trajectory(cfg: ScenarioConfig) -> RunOutput:
    c = cfg.analysis.fig_trajectory
    params = LocalMotionParams(c.chi0, c.phi0, c.lambda0, c.v_cl)
    # a little past the nominal span so the last first-passage is inside it
    t1 = 1.02 * c.wavelengths * c.lambda0 / abs(params.mean_velocity)
    traj = integrate_local(params, t1, local_integrator_options(params, c.rtol))
    out = RunOutput()
    out.csv("trajectory.csv", ["t", "x", "v", "step_flag"], zip(traj.t, traj.x, traj.v, traj.step_flag))
    grid_t = np.linspace(0.0, t1, c.n_samples)
    xs = traj.dense(grid_t)
    resid = np.max(np.abs(local_trajectory_residual(params, xs, grid_t)))
    first_passage = time_averaged_velocity(traj, 0.0, c.lambda0) if c.wavelengths >= 1 else float("nan")
    # whole wavelengths only, so the slow/fast phases are sampled evenly
    whole = max(1, math.floor(c.wavelengths))
    t_whole = min(t1, whole * c.lambda0 / abs(first_passage)) if math.isfinite(first_passage) else t1
    peak = float(np.max(np.abs(params.velocity(xs))))
    # the peak sits between samples; the analytic maximum bounds it
    dense_peak = float(np.max(np.abs(params.velocity(traj.dense(np.linspace(0, t1, 20 * c.n_samples))))))
    out.json(
        "trajectory.json",
        {
            "chi0": c.chi0,
            "peak_velocity": max(peak, dense_peak),
            "peak_velocity_analytic": abs(params.peak_velocity),
            "time_averaged_velocity": first_passage,
            "mean_velocity_analytic": params.mean_velocity,
            "fraction_below_mean": fraction_of_time_below(traj, abs(params.mean_velocity), params.velocity, t_end=t_whole),
            "fraction_below_mean_analytic": 0.5 + 1.0 / (math.pi * math.cosh(c.chi0)),
            "implicit_residual": float(resid),
            "steps": traj.meta["steps"],
            "rejected": traj.meta["rejected"],
        },
    )
    out.summary = {"steps": traj.meta["steps"], "implicit_residual": float(resid)}
    return out


def _regime(lam, lam_minus, window, span):
    if lam <= lam_minus / 5:
        return "small"
    if lam >= 5 * max(span, float(window.lambda_plus[0])):
        return "large"
    if window.nonempty[0] and lam_minus < lam < float(window.lambda_plus[0]):
        return "window"
    return "between"


def cmd_husimi(cfg: ScenarioConfig) -> RunOutput:
    h = cfg.analysis.husimi
    well = build_well(cfg)
    spec = build_spec(cfg, well)
    state = WKBState(spec, well)
    lv = spec.level
    t = h.t * lv.period
    xa = np.array([h.x])
    window = classical_window(state, None, xa)
    lam_minus = float(window.lambda_minus[0])
    if not math.isfinite(lam_minus):
        raise ValueError(f"husimi.x={h.x} is not inside the classically allowed interval")
    scale = lam_minus if h.lambda_units == "minus" else 1.0
    oracle = build_oracle(spec, well) if cfg.oracle else None
    sampled = SampledWavefunction.from_superposition(oracle, t, well) if oracle is not None else None
    p_max = math.sqrt(2 * well.mass * (lv.energy - well.minimum[1]))
    out = RunOutput()

    xs_w = np.linspace(*state.interior, h.window_points)
    out.csv("window.csv", ["x", "lambda_minus", "lambda_plus", "nonempty"], _window_rows(state, xs_w))

    limit_rows = []
    report = {"x": h.x, "t": t, "lambda_minus": lam_minus, "lambda_plus": float(window.lambda_plus[0]), "lambdas": []}
    for k, mult in enumerate(h.lambdas):
        lam = mult * scale
        regime = _regime(lam, lam_minus, window, lv.span)
        if regime == "large":
            xs = np.linspace(-2.5 * lam, 2.5 * lam, h.x_points) + well.minimum[0]
        else:
            xs = np.linspace(*state.interior, h.x_points)
        pm = p_max + 3 * well.hbar / lam
        ps = np.linspace(-pm, pm, h.p_points)
        rows = []
        entry = {"lambda": lam, "regime": regime, "accuracy": dataclasses.asdict(accuracy_pair(lam, well.hbar))}
        if sampled is not None:
            q = husimi_grid_exact(sampled, xs, ps, lam, well.hbar)
            rows += [(xv, pv, q[i, j], "exact") for i, xv in enumerate(xs) for j, pv in enumerate(ps)]
            # a 2-D trapezoid needs spacing ~lam/3, only affordable for lam of order the window
            if h.normalization and regime == "window":
                entry["normalization_error"] = abs(phase_space_norm(sampled, lam, well.hbar, p_max) - 1.0)
        if regime in ("window", "small", "between"):
            X, P = np.meshgrid(xs, ps, indexing="ij")
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                qw = husimi_wkb(state, None, X, P, lam, t)
            rows += [(xv, pv, qw[i, j], "wkb") for i, xv in enumerate(xs) for j, pv in enumerate(ps)]
        out.csv(f"phase_space_{k:03d}.csv", ["x", "p", "Q", "mode"], rows)

        if regime == "small" and sampled is not None:
            X, P = np.meshgrid(xs, ps, indexing="ij")
            dev = limit_small_lambda(sampled, X, P, lam, well.hbar).relative_deviation()
            limit_rows.append((lam, regime, dev, 0.1, dev < 0.1))
        elif regime == "large" and sampled is not None:
            X, P = np.meshgrid(xs, ps, indexing="ij")
            dev = limit_large_lambda(sampled, X, P, lam, well.hbar, center=well.minimum[0]).relative_deviation()
            limit_rows.append((lam, regime, dev, 0.1, dev < 0.1))
        elif regime == "window":
            rep = classical_form_check(state, None, h.x, lam, t, mode="wkb")
            dev = abs(rep.weight_plus - rep.rho_weight_plus)
            limit_rows.append((lam, regime, dev, 1e-3, dev < 1e-3))
            entry["classical_form"] = dataclasses.asdict(rep)
            if sampled is not None:
                entry["classical_form_exact"] = dataclasses.asdict(classical_form_check(state, None, h.x, lam, t, mode="exact", wavefunction=sampled))
        report["lambdas"].append(entry)
    out.csv("limits.csv", ["lambda", "regime", "deviation", "tolerance", "passed"], limit_rows)

    lams = np.array(h.limit_lambdas) * lam_minus
    wkb_ref = bohm_limit_check(state, None, h.x, t, lams, reference="wkb", psi=oracle, mean_mode="exact" if oracle is not None else "wkb")
    rows = []
    ex_ref = bohm_limit_check(state, None, h.x, t, lams, reference="exact", psi=oracle) if oracle is not None else None
    for i, lam in enumerate(lams):
        rows.append(
            (
                lam,
                wkb_ref.mean_velocities[i],
                wkb_ref.v_bohm,
                wkb_ref.relative[i],
                ex_ref.v_bohm if ex_ref else float("nan"),
                ex_ref.relative[i] if ex_ref else float("nan"),
            )
        )
    out.csv("bohm_limit.csv", ["lambda", "v_bar", "v_bohm_wkb", "deviation_wkb", "v_bohm_exact", "deviation_exact"], rows)
    report["bohm_limit_monotone"] = wkb_ref.monotone(noise=1e-3)
    out.json("husimi.json", report)
    out.ok = all(r[4] for r in limit_rows)
    out.summary = {"limits_passed": out.ok}
    return out


def _window_rows(state, xs):
    win = classical_window(state, None, xs)
    return zip(xs, win.lambda_minus, win.lambda_plus, win.nonempty)


def cmd_equivariance(cfg: ScenarioConfig) -> RunOutput:
    e = cfg.analysis.equivariance
    well = build_well(cfg)
    states = solve_band(well, e.levels)
    c = np.full(len(e.levels), 1.0 / math.sqrt(len(e.levels)), dtype=complex)
    psi = ExactSuperposition(states, c, hbar=well.hbar, mass=well.mass)
    grid = states[0].grid
    top = solve_level(well, max(e.levels))
    period = solve_level(well, min(e.levels)).period
    p_max = math.sqrt(2 * well.mass * (top.energy - well.minimum[1]))
    opts = IntegratorOptions(
        rtol=e.rtol,
        atol=1e-10 * top.span,
        length_scale=well.h / p_max,
        speed_floor=p_max / well.mass,
        cap_fraction=e.cap_fraction,
    )
    seed = cfg.seeds()["ensemble"]
    x = sample_initial_positions(grid, psi.density(grid, 0.0), e.count, seed=seed)
    times = np.linspace(0.0, e.duration * period, e.samples)
    velocity = lambda xx, tt: bohm_velocity_exact(psi, xx, tt, well.hbar, well.mass)
    rows = [(i, 0.0, xi) for i, xi in enumerate(x)]
    ks = []
    for t0, t1 in zip(times[:-1], times[1:]):
        rep = equivariance_check(x, velocity, t0, t1, grid, psi.density(grid, t1), opts)
        x = rep.positions
        ks.append({"t": t1, "ks": rep.ks, "excluded": rep.excluded})
        rows += [(i, t1, xi) for i, xi in enumerate(x)]
    rows.sort(key=lambda r: (r[0], r[1]))
    out = RunOutput()
    out.csv("ensemble.csv", ["trajectory_id", "t", "x"], rows)
    out.json("equivariance.json", {"levels": e.levels, "count": e.count, "seed": seed, "ks": ks, "ks_limit": e.ks_limit, "order_preserved": order_preserved(rows, e.count, times)})
    out.ok = all(k["ks"] < e.ks_limit for k in ks)
    out.summary = {"ks_final": ks[-1]["ks"], "passed": out.ok}
    return out


def order_preserved(rows, count, times) -> bool:
    """No two trajectories exchange order between sample times (1-D no-crossing)."""
    by_time = {}
    for i, t, xv in rows:
        by_time.setdefault(t, np.empty(count))[i] = xv
    first = np.argsort(by_time[times[0]], kind="stable")
    return all(np.all(np.diff(by_time[t][first]) >= 0) for t in times)


# ---------------------------------------------------------------------------
# property suite


def _check(name, value, limit, passed, skipped=False):
    return {"name": name, "value": None if value is None else float(value), "limit": limit, "passed": bool(passed), "skipped": skipped}


def property_checks(cfg: ScenarioConfig) -> list[dict]:
    ps = cfg.analysis.property_suite
    well = build_well(cfg)
    spec = build_spec(cfg, well, strict=False)
    state = WKBState(spec, well)
    rng = np.random.default_rng(cfg.seeds()["property_suite"])
    hb = well.hbar
    checks = []

    norm = float(np.sum(np.abs(spec.coefficients) ** 2))
    checks.append(_check("coefficient_norm", abs(norm - 1.0), ps.tolerance_norm, abs(norm - 1.0) <= ps.tolerance_norm))

    res = max(abs(quantization_residual(well, solve_level(well, n))) for n in (0, spec.center_level))
    checks.append(_check("quantization_residual", res, 1e-9, res < 1e-9))

    lo, hi = state.interior
    xs = np.sort(rng.uniform(lo, hi, ps.examples))
    ts = rng.uniform(0, spec.level.period, ps.examples)
    vm, vp = extremal_velocities(state, None, xs, ts)
    vcl = state.classical_speed(xs)
    ok = np.isfinite(vp)
    prod = np.max(np.abs(vm[ok] * vp[ok] / vcl[ok] ** 2 - 1.0)) if np.any(ok) else 0.0
    checks.append(_check("extremal_product", prod, 1e-12, prod < 1e-12))

    env = state.envelopes(xs, ts)
    m1 = classicality_measure(env.rho_plus, env.rho_minus)
    m2 = classicality_measure(env.rho_minus, env.rho_plus)
    sym = float(np.nanmax(np.abs(m1 - m2) / np.maximum(1.0, np.abs(m1))))
    low = float(np.nanmin(m1))
    checks.append(_check("classicality_symmetric", sym, 1e-12, sym < 1e-12))
    checks.append(_check("classicality_at_least_one", low, 1.0, low >= 1.0 - 1e-12))

    dens = state.density(xs, ts)
    neg = max(0.0, float(-np.nanmin(dens) / wkb_density_scale(state)))
    checks.append(_check("density_nonnegative", neg, 1e-12, neg <= 1e-12))

    shift = rng.uniform(-1, 1, ps.examples)
    taus = rng.uniform(0, spec.level.period, ps.examples)
    a = envelope_sums(spec, taus, ts)
    b = envelope_sums(spec, taus + shift, ts + shift)
    trans = float(np.max(np.abs(a - b)))
    checks.append(_check("envelope_translation", trans, 1e-10, trans < 1e-10))

    lams = np.exp(rng.uniform(-5, 5, ps.examples))
    acc = max(abs(accuracy_pair(l, hb).dx * accuracy_pair(l, hb).dp / (hb / 2) - 1.0) for l in lams)
    checks.append(_check("accuracy_product", acc, 1e-15, acc <= 1e-15))

    win = classical_window(state, None, xs)
    pick = np.flatnonzero(win.nonempty)
    if len(pick):
        lam = float(np.median(win.middle[pick]))
        P = rng.uniform(-2, 2, len(xs)) * state.momentum(xs)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            q = husimi_wkb(state, None, xs, P, lam, ts)
        qmin = max(0.0, float(-np.nanmin(q)))
        checks.append(_check("husimi_wkb_nonnegative", qmin, 1e-12, qmin <= 1e-12))

    cs = CoherentStateParams(0.3, 1.7, 0.8)
    grid = np.linspace(-12, 12, 6001)
    cn = abs(np.trapezoid(np.abs(coherent_wavefunction(cs, hb, grid)) ** 2, grid) - 1.0)
    checks.append(_check("coherent_normalization", cn, 1e-10, cn < 1e-10))

    lp = LocalMotionParams(0.01, 0.4, 1.0, 1.0)
    lm = LocalMotionParams(-0.01, 0.4, 1.0, 1.0)
    xx = rng.uniform(-1, 1, ps.examples)
    mirror = float(np.max(np.abs(lp.velocity(xx) + lm.velocity(xx)) / np.abs(lp.velocity(xx))))
    checks.append(_check("local_velocity_antisymmetry", mirror, 1e-12, mirror < 1e-12))

    if cfg.oracle:
        states = solve_band(well, list(spec.levels))
        eig = ExactSuperposition([states[spec.band // 2]], [1.0], hbar=hb, mass=well.mass)
        g = states[0].grid[::7]
        v = bohm_velocity_exact(eig, g, 0.37)
        stasis = float(np.nanmax(np.abs(v)))
        checks.append(_check("eigenstate_stasis", stasis, 1e-10, stasis < 1e-10))

        psi = ExactSuperposition(states, spec.coefficients / math.sqrt(norm), hbar=hb, mass=well.mass)
        xr = rng.uniform(lo, hi, ps.continuity_points)
        tr = rng.uniform(0, spec.level.period, ps.continuity_points)
        r, s = continuity_residual(psi, xr, tr, hb, well.mass)
        big = s > 1e-6 * np.max(s)
        cres = float(np.max(np.abs(r[big]) / s[big]))
        checks.append(_check("continuity_residual", cres, 1e-4, cres < 1e-4))
    else:
        checks.append(_check("eigenstate_stasis", None, 1e-10, True, skipped=True))
        checks.append(_check("continuity_residual", None, 1e-4, True, skipped=True))
    return checks


def cmd_property_suite(cfg: ScenarioConfig) -> RunOutput:
    checks = property_checks(cfg)
    out = RunOutput()
    passed = all(c["passed"] for c in checks)
    out.json("property_suite.json", {"passed": passed, "checks": checks})
    lines = []
    for c in checks:
        status = "SKIP" if c["skipped"] else ("PASS" if c["passed"] else "FAIL")
        value = "n/a" if c["value"] is None else f"{c['value']:.3e}"
        lines.append(f"{status}  {c['name']:<32s} value={value} limit={c['limit']:.1e}")
    lines.append(f"{sum(c['passed'] for c in checks)}/{len(checks)} checks passed")
    out.files["property_suite.txt"] = "\n".join(lines) + "\n"
    out.ok = passed
    out.summary = {"passed": passed, "failed": [c["name"] for c in checks if not c["passed"]]}
    return out


HANDLERS = {
    "levels": cmd_levels,
    "fig-rho": cmd_fig_rho,
    "fig-trajectory": cmd_fig_trajectory,
    "husimi": cmd_husimi,
    "equivariance": cmd_equivariance,
    "property-suite": cmd_property_suite,
}


# ---------------------------------------------------------------------------
# entry point


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semibohm", description="Semiclassical Bohmian trajectories and Husimi analysis.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="YAML scenario file (defaults apply when omitted)")
    ap.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    ap.add_argument("--seed", type=int, help="top-level seed (overrides the config)")
    ap.add_argument("--oracle", choices=("on", "off"), help="enable the exact eigensolver oracle")
    return ap


def resolve(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.oracle is not None:
        cfg = cfg.replace(oracle=args.oracle == "on")
    if args.out is not None:
        cfg = cfg.replace(output=dataclasses.replace(cfg.output, directory=str(args.out)))
    return cfg


VALIDATION_ERRORS = (ConfigError, SpecError, WellError, ValueError, FileNotFoundError)
NUMERICAL_ERRORS = (IntegrationError, QuadratureError, EigensolverError, NumericalFailure, ArithmeticError, np.linalg.LinAlgError)


def run(argv=None) -> int:
    args = parser().parse_args(argv)
    started = time.perf_counter()
    try:
        cfg = resolve(args)
        result = HANDLERS[args.command](cfg)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    manifest = write_outputs(Path(cfg.output.directory), args.command, cfg, result, time.perf_counter() - started)
    print(json.dumps({"command": args.command, "ok": result.ok, **result.summary, "outputs": sorted(manifest.outputs)}, default=_json_default))
    return 0 if result.ok else 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
