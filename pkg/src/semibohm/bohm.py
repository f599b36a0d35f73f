"""Bohmian velocity fields, local motion near a point, and ensemble checks.

Velocities are NaN ("flagged") where the density is below the node threshold
or, for the semiclassical field, inside a turning-point exclusion zone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.stats import kstest

from .integrate import EnsembleResult, IntegratorOptions, Trajectory, integrate_ensemble, integrate_trajectory
from .wkb import WKBState

NODE_THRESHOLD = 1e-12
CLASSICALITY_THRESHOLD = 50.0


# ---------------------------------------------------------------------------
# instantaneous velocities


def bohm_velocity_exact(psi, x, t, hbar: float = 1.0, mass: float = 1.0, density_scale: float | None = None):
    """hbar Im(psi* dpsi/dx) / (m |psi|^2) for any field with ``__call__`` and ``derivative``.

    ``density_scale`` sets the node threshold (``NODE_THRESHOLD * density_scale``);
    by default the field's own ``density_scale`` attribute is used if present.
    """
    if hasattr(psi, "value_and_derivative"):
        val, der = psi.value_and_derivative(x, t)
    else:
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        val = psi(x, t)
        der = psi.derivative(x, t)
    dens = np.abs(val) ** 2
    if density_scale is None:
        density_scale = getattr(psi, "density_scale", None)
    if density_scale is None:
        density_scale = float(np.max(dens))
    flagged = dens < NODE_THRESHOLD * density_scale
    with np.errstate(divide="ignore", invalid="ignore"):
        v = hbar * np.imag(np.conj(val) * der) / (mass * dens)
    return np.where(flagged, np.nan, v)


def exact_velocity_field(psi, hbar: float = 1.0, mass: float = 1.0) -> Callable:
    scale = getattr(psi, "density_scale", None)
    return lambda x, t: bohm_velocity_exact(psi, x, t, hbar, mass, scale)


def wkb_density_scale(state: WKBState) -> float:
    """Time-averaged density maximum over the interior, 2 m/(T p_min) sum|c_r|^2."""
    lo, hi = state.interior
    p_min = float(np.min(state.momentum(np.array([lo, hi]))))
    norm = float(np.sum(np.abs(state.spec.coefficients) ** 2))
    return 2.0 * state.well.mass / (state.level.period * p_min) * norm


def bohm_velocity_wkb(spec_or_state, well=None, x=0.0, t=0.0):
    """v_cl (rho+ - rho-) / (rho+ + rho- - 2 sqrt(rho+ rho-) cos(2S/hbar + phi+ - phi-))."""
    state = spec_or_state if isinstance(spec_or_state, WKBState) else WKBState(spec_or_state, well)
    env = state.envelopes(x, t)
    dens = state.density(x, t)
    vcl = state.classical_speed(x)
    flagged = ~env.valid | ~(dens >= NODE_THRESHOLD * wkb_density_scale(state))
    with np.errstate(divide="ignore", invalid="ignore"):
        v = vcl * (env.rho_plus - env.rho_minus) / dens
    return np.where(flagged, np.nan, v)


def wkb_velocity_field(state: WKBState) -> Callable:
    return lambda x, t: bohm_velocity_wkb(state, None, x, t)


def extremal_velocities(spec_or_state, well=None, x=0.0, t=0.0):
    """(v-, v+) = v_cl (sqrt(rho+) -+ sqrt(rho-)) / (sqrt(rho+) +- sqrt(rho-)), |v-| <= |v+|.

    NaN where rho+ = rho- (v+ unbounded) or the point is flagged.
    """
    state = spec_or_state if isinstance(spec_or_state, WKBState) else WKBState(spec_or_state, well)
    env = state.envelopes(x, t)
    vcl = state.classical_speed(x)
    return extremal_from_densities(vcl, env.rho_plus, env.rho_minus)


def extremal_from_densities(vcl, rho_plus, rho_minus):
    sp, sm = np.sqrt(rho_plus), np.sqrt(rho_minus)
    with np.errstate(divide="ignore", invalid="ignore"):
        v_plus = vcl * (sp + sm) / (sp - sm)
        v_minus = vcl * (sp - sm) / (sp + sm)
    v_plus = np.where(sp == sm, np.nan, v_plus)
    return v_minus, v_plus


def classicality_measure(rho_plus, rho_minus):
    """(rho+/rho- + rho-/rho+)/2, +inf when one side vanishes."""
    rho_plus, rho_minus = np.asarray(rho_plus, dtype=float), np.asarray(rho_minus, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = 0.5 * (rho_plus / rho_minus + rho_minus / rho_plus)
    one_sided = ((rho_plus == 0) | (rho_minus == 0)) & ~((rho_plus == 0) & (rho_minus == 0))
    m = np.where(one_sided, np.inf, m)
    return m if m.ndim else float(m)


def classicality(spec_or_state, well=None, x=0.0, t=0.0, threshold: float = CLASSICALITY_THRESHOLD):
    state = spec_or_state if isinstance(spec_or_state, WKBState) else WKBState(spec_or_state, well)
    env = state.envelopes(x, t)
    m = classicality_measure(env.rho_plus, env.rho_minus)
    return m, np.asarray(m) >= threshold


@dataclass(frozen=True)
class NonclassicalReport:
    """``interior_mass`` is the integral of the mean density over the interior; it
    drops well below 1 while a packet sits inside a turning-point exclusion zone,
    and ``probability`` then describes only the remnant outside it."""

    probability: float
    excluded_fraction: float
    interior_mass: float = float("nan")


def nonclassical_probability(spec_or_state, well=None, t: float = 0.0, threshold: float = CLASSICALITY_THRESHOLD, n_points: int = 4001) -> NonclassicalReport:
    """Fraction of the interior mean density where the classicality measure is below ``threshold``.

    Flagged grid points are dropped from both integrals; the share of
    mean-density mass they carry is reported as ``excluded_fraction``.
    """
    state = spec_or_state if isinstance(spec_or_state, WKBState) else WKBState(spec_or_state, well)
    lo, hi = state.interior
    x = np.linspace(lo, hi, n_points + 2)[1:-1]
    env = state.envelopes(x, t)
    rho_bar = np.nan_to_num(env.rho_bar)
    m = classicality_measure(np.nan_to_num(env.rho_plus), np.nan_to_num(env.rho_minus))
    ok = env.valid & np.isfinite(env.rho_bar) & ~np.isnan(m)
    total = np.trapezoid(rho_bar, x)
    kept = np.trapezoid(np.where(ok, rho_bar, 0.0), x)
    bad = np.trapezoid(np.where(ok & (m < threshold), rho_bar, 0.0), x)
    if kept <= 0:
        return NonclassicalReport(float("nan"), 1.0, float(total))
    return NonclassicalReport(float(bad / kept), float(1.0 - kept / total) if total > 0 else 0.0, float(total))


def balanced_probability(spec_or_state, well=None, t: float = 0.0, ratio: tuple[float, float] = (0.5, 2.0), n_points: int = 4001) -> float:
    """Share of the interior mean density where rho+/rho- lies inside ``ratio``."""
    state = spec_or_state if isinstance(spec_or_state, WKBState) else WKBState(spec_or_state, well)
    lo, hi = state.interior
    x = np.linspace(lo, hi, n_points + 2)[1:-1]
    env = state.envelopes(x, t)
    rho_bar = np.nan_to_num(env.rho_bar)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = env.rho_plus / env.rho_minus
    inside = env.valid & (q >= ratio[0]) & (q <= ratio[1])
    total = np.trapezoid(rho_bar, x)
    return float(np.trapezoid(np.where(inside, rho_bar, 0.0), x) / total) if total > 0 else float("nan")


# ---------------------------------------------------------------------------
# local motion near (x0, t0)


@dataclass(frozen=True)
class LocalMotionParams:
    chi0: float
    phi0: float
    lambda0: float
    v_cl0: float
    x0: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise ValueError("lambda0 must be positive")
        if self.v_cl0 < 0:
            raise ValueError("v_cl0 must be non-negative")

    def velocity(self, x, t=None):
        """Frozen-envelope velocity v_cl sinh(chi) / (cosh(chi) - cos(phi0 + 4 pi (x - x0)/lambda0))."""
        x = np.asarray(x, dtype=float)
        arg = self.phi0 + 4 * math.pi * (x - self.x0) / self.lambda0
        return self.v_cl0 * math.sinh(self.chi0) / (math.cosh(self.chi0) - np.cos(arg))

    @property
    def mean_velocity(self) -> float:
        return self.v_cl0 * math.tanh(self.chi0)

    @property
    def peak_velocity(self) -> float:
        """v_cl coth(chi0/2), reached where the cosine equals 1."""
        return self.v_cl0 / math.tanh(self.chi0 / 2)


def local_params(spec_or_state, well=None, x0: float = 0.0, t0: float = 0.0) -> LocalMotionParams:
    state = spec_or_state if isinstance(spec_or_state, WKBState) else WKBState(spec_or_state, well)
    env = state.envelopes(np.array([x0]), np.array([t0]))
    rp, rm = float(env.rho_plus[0]), float(env.rho_minus[0])
    if not (rp > 0 and rm > 0) or not env.valid[0]:
        raise ValueError(f"local parameters need both densities positive at x0={x0} (rho+={rp}, rho-={rm})")
    phi0 = float(state.interference_phase(np.array([x0]), np.array([t0]), env)[0])
    return LocalMotionParams(
        chi0=0.5 * math.log(rp / rm),
        phi0=phi0,
        lambda0=float(state.de_broglie(np.array([x0]))[0]),
        v_cl0=float(state.classical_speed(np.array([x0]))[0]),
        x0=x0,
        t0=t0,
    )


def local_trajectory_residual(params: LocalMotionParams, x, t):
    """Implicit-solution mismatch divided by lambda0.

    (d - lambda0 sech(chi0)/(4 pi) [sin(phi0 + 4 pi d/lambda0) - sin(phi0)]) - v_cl0 tanh(chi0) (t - t0), d = x - x0.
    The bracket is written multiplied through by d, which removes the d = 0 singularity.
    """
    d = np.asarray(x, dtype=float) - params.x0
    k = 4 * math.pi / params.lambda0
    lhs = d - params.lambda0 / (4 * math.pi * math.cosh(params.chi0)) * (np.sin(params.phi0 + k * d) - math.sin(params.phi0))
    rhs = params.v_cl0 * math.tanh(params.chi0) * (np.asarray(t, dtype=float) - params.t0)
    out = (lhs - rhs) / params.lambda0
    return out if np.ndim(out) else float(out)


def local_integrator_options(params: LocalMotionParams, rtol: float = 1e-8) -> IntegratorOptions:
    return IntegratorOptions(rtol=rtol, atol=1e-10 * params.lambda0, length_scale=params.lambda0, speed_floor=params.v_cl0)


def integrate_local(params: LocalMotionParams, t1: float, options: IntegratorOptions | None = None, sample_times=None) -> Trajectory:
    opts = options or local_integrator_options(params)
    return integrate_trajectory(lambda x, t: params.velocity(x, t), params.x0, params.t0, t1, opts, sample_times)


def time_averaged_velocity(traj: Trajectory, x0: float, lambda0: float, direction: int | None = None) -> float:
    """lambda0 over the first-passage time to x0 +- lambda0 (sign from the motion)."""
    if direction is None:
        direction = 1 if traj.x[-1] >= x0 else -1
    target = x0 + direction * lambda0
    reached = np.flatnonzero(direction * (traj.x - target) >= 0)
    if len(reached) == 0:
        raise ValueError("trajectory never advances one wavelength within its span")
    i = int(reached[0])
    if i == 0:
        return math.inf * direction
    lo, hi = traj.t[i - 1], traj.t[i]
    if traj._coeffs is not None:
        t_cross = brentq(lambda tt: float(traj.dense(np.array([tt]))[0]) - target, lo, hi, xtol=1e-14 * max(1.0, hi))
    else:
        t_cross = lo + (target - traj.x[i - 1]) * (hi - lo) / (traj.x[i] - traj.x[i - 1])
    return direction * lambda0 / (t_cross - traj.t[0])


def fraction_of_time_below(traj: Trajectory, speed: float, velocity: Callable | None = None, samples: int = 200_001, t_end: float | None = None) -> float:
    """Share of the integrated time (up to ``t_end``) with |v| below ``speed``.

    With ``velocity`` the trajectory is resampled uniformly in time through its
    dense output; otherwise the accepted steps are used piecewise-constant.
    """
    if velocity is not None:
        ts = np.linspace(traj.t[0], traj.t[-1] if t_end is None else t_end, samples)
        vs = np.asarray(velocity(traj.dense(ts), ts), dtype=float)
        return float(np.mean(np.abs(vs) < speed))
    dt = np.diff(traj.t)
    slow = np.abs(0.5 * (traj.v[1:] + traj.v[:-1])) < speed
    return float(np.sum(dt[slow]) / np.sum(dt))


# ---------------------------------------------------------------------------
# ensembles


def sample_initial_positions(grid, density, count: int, seed: int | None = None) -> np.ndarray:
    """Inverse-CDF samples from a tabulated density (trapezoid CDF, linear inversion)."""
    grid = np.asarray(grid, dtype=float)
    density = np.nan_to_num(np.asarray(density, dtype=float))
    if np.any(density < 0):
        density = np.clip(density, 0.0, None)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid))])
    if not cdf[-1] > 0:
        raise ValueError("density is degenerate (no positive mass)")
    cdf /= cdf[-1]
    u = np.random.default_rng(seed).uniform(size=count)
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return np.interp(u, cdf[keep], grid[keep])


def density_cdf(grid, density) -> Callable:
    grid = np.asarray(grid, dtype=float)
    density = np.nan_to_num(np.asarray(density, dtype=float))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return lambda x: np.interp(x, grid, cdf)


@dataclass(frozen=True)
class EquivarianceReport:
    ks: float
    excluded: int
    excluded_fraction: float
    positions: np.ndarray


def equivariance_check(ensemble, velocity: Callable, t0: float, t1: float, grid, density_t1, options: IntegratorOptions = IntegratorOptions()) -> EquivarianceReport:
    """KS distance between the transported ensemble and the reference density at ``t1``."""
    ensemble = np.asarray(ensemble, dtype=float)
    result: EnsembleResult = integrate_ensemble(velocity, ensemble, t0, t1, options)
    moved = result.x[~result.failed]
    stat = kstest(moved, density_cdf(grid, density_t1)).statistic
    excluded = int(np.count_nonzero(result.failed))
    return EquivarianceReport(float(stat), excluded, excluded / len(ensemble), result.x)


def continuity_residual(psi, x, t, hbar: float = 1.0, mass: float = 1.0, dx: float = 1e-4, dt: float = 1e-5):
    """Central-difference residual of d|psi|^2/dt + d(|psi|^2 v)/dx, with its local scale.

    The scale is k |j| + |d rho/dt| + (hbar k^2/m) rho with k = |psi'|/|psi|,
    the natural magnitude of each term at that point.
    """
    x = np.asarray(x, dtype=float)
    rho = lambda xx, tt: np.abs(psi(xx, tt)) ** 2
    flux = lambda xx, tt: hbar * np.imag(np.conj(psi(xx, tt)) * psi.derivative(xx, tt)) / mass
    drho = (rho(x, t + dt) - rho(x, t - dt)) / (2 * dt)
    dflux = (flux(x + dx, t) - flux(x - dx, t)) / (2 * dx)
    r0 = rho(x, t)
    k = np.abs(psi.derivative(x, t)) / np.sqrt(np.maximum(r0, 1e-300))
    scale = k * np.abs(flux(x, t)) + np.abs(drho) + hbar * k**2 * r0 / mass
    return drho + dflux, scale
