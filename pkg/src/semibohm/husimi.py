"""Coherent states, the Husimi Q-function and the mean observed velocity.

Two evaluation routes are kept side by side: direct quadrature of the
coherent-state overlap against a sampled wavefunction ("exact"), and the
three-term Gaussian closed form built from the WKB envelopes ("wkb").
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .bohm import bohm_velocity_exact, bohm_velocity_wkb
from .eigensolver import ExactSuperposition
from .wells import PotentialWell, QuadratureError
from .wkb import WKBState

WINDOW_FACTOR = 10.0
LIMIT_FACTOR = 5.0
SUPPORT_HALF_WIDTH = 6.0
GL_ORDER = 8


class HusimiWindowWarning(UserWarning):
    """lambda lies outside the classical window where the closed form holds."""


class VanishingMarginal(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# coherent states


@dataclass(frozen=True)
class CoherentStateParams:
    """Centre (x, p) and width ``lam`` of |x, p>_lam. x and p may be arrays."""

    x: float | np.ndarray
    p: float | np.ndarray
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"coherent-state width must be positive, got {self.lam}")

    def accuracy(self, hbar: float = 1.0) -> "AccuracyPair":
        return accuracy_pair(self.lam, hbar)


@dataclass(frozen=True)
class AccuracyPair:
    """Retrodictive position and momentum errors of the joint measurement."""

    dx: float
    dp: float


def accuracy_pair(lam: float, hbar: float = 1.0) -> AccuracyPair:
    return AccuracyPair(lam / math.sqrt(2.0), hbar / (math.sqrt(2.0) * lam))


def coherent_wavefunction(cs: CoherentStateParams, hbar: float, x_prime):
    """(pi lam^2)^(-1/4) exp[-(x'-x)^2/(2 lam^2) + i p x'/hbar - i p x/(2 hbar)]."""
    x_prime = np.asarray(x_prime, dtype=float)
    lam = cs.lam
    norm = (math.pi * lam**2) ** -0.25
    return norm * np.exp(-((x_prime - cs.x) ** 2) / (2 * lam**2) + 1j * cs.p * x_prime / hbar - 0.5j * cs.p * cs.x / hbar)


# ---------------------------------------------------------------------------
# sampled wavefunctions


@dataclass(frozen=True, eq=False)
class SampledWavefunction:
    """psi(x) at one instant, with the data quadrature needs.

    ``wavelength`` is the shortest de Broglie length present; ``grid`` and
    ``values`` (optional) feed the momentum-space transform.
    """

    func: Callable
    support: tuple[float, float]
    wavelength: float
    grid: np.ndarray | None = None
    values: np.ndarray | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        out = np.zeros(x.shape, dtype=complex)
        if np.any(inside):
            out[inside] = self.func(x[inside])
        return out

    @classmethod
    def from_superposition(cls, psi: ExactSuperposition, t: float, well: PotentialWell) -> "SampledWavefunction":
        e_max = float(np.max(psi.energies))
        p_max = math.sqrt(2 * well.mass * (e_max - well.minimum[1]))
        grid = psi.grid
        return cls(lambda x: psi(x, t), psi.support, well.h / p_max, grid, psi(grid, t))

    @classmethod
    def from_values(cls, grid, values, hbar: float = 1.0) -> "SampledWavefunction":
        """Linear-interpolated samples; wavelength from the spectrum's bandwidth."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=complex)
        dx = grid[1] - grid[0]
        spec = np.abs(np.fft.fft(values)) ** 2
        k = 2 * np.pi * np.fft.fftfreq(len(grid), dx)
        keep = spec > 1e-12 * spec.max()
        k_max = max(float(np.max(np.abs(k[keep]))), 2 * np.pi / (grid[-1] - grid[0]))
        re = lambda x: np.interp(x, grid, values.real) + 1j * np.interp(x, grid, values.imag)
        return cls(re, (float(grid[0]), float(grid[-1])), 2 * np.pi / k_max, grid, values)


def _panel_nodes(lo: float, hi: float, panel: float, order: int = GL_ORDER):
    n = max(1, math.ceil((hi - lo) / panel))
    edges = np.linspace(lo, hi, n + 1)
    xi, wi = leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
    weights = (half[:, None] * wi[None, :]).ravel()
    return nodes, weights


def overlap(wavefunction: SampledWavefunction, x: float, p, lam: float, hbar: float = 1.0, tolerance: float = 1e-8):
    """<x, p|psi> for one centre x and any number of momenta p.

    Composite Gauss-Legendre over x +- 6 lam intersected with the support; the
    panel length resolves min(lam, lambda_0, 2 pi hbar/|p|)/4.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    lo, hi = wavefunction.support
    a = max(lo, x - SUPPORT_HALF_WIDTH * lam)
    b = min(hi, x + SUPPORT_HALF_WIDTH * lam)
    if b <= a:
        return np.zeros(p.shape, dtype=complex)
    p_abs = float(np.max(np.abs(p))) if p.size else 0.0
    scales = [lam, wavefunction.wavelength]
    if p_abs > 0:
        scales.append(2 * math.pi * hbar / p_abs)
    nodes, weights = _panel_nodes(a, b, min(scales) / 4.0)
    psi = wavefunction(nodes)
    # psi is zero beyond the support; a clipped window is only safe if psi has died there
    scale = float(np.max(np.abs(psi))) if psi.size else 0.0
    for edge, clipped in ((a, a > x - SUPPORT_HALF_WIDTH * lam), (b, b < x + SUPPORT_HALF_WIDTH * lam)):
        if clipped and scale > 0:
            at_edge = abs(complex(wavefunction(np.array([edge]))[0]))
            if at_edge > tolerance * max(scale, 1.0):
                raise QuadratureError(f"support truncation at x={edge:.6g}: |psi|={at_edge:.3g}", at_edge)
    gauss = (math.pi * lam**2) ** -0.25 * np.exp(-((nodes - x) ** 2) / (2 * lam**2)) * weights * psi
    # conj of the coherent state: exp(-i p x'/hbar + i p x/(2 hbar))
    kernel = np.exp(-1j * np.multiply.outer(p, nodes) / hbar)
    return (kernel @ gauss) * np.exp(0.5j * p * x / hbar)


def husimi_exact(wavefunction: SampledWavefunction, cs: CoherentStateParams, hbar: float = 1.0, tolerance: float = 1e-8):
    """(1/h)|<x,p|psi>|^2 by quadrature; x and p broadcast against each other."""
    x, p = np.broadcast_arrays(np.asarray(cs.x, dtype=float), np.asarray(cs.p, dtype=float))
    out = np.empty(x.shape)
    flat_x, flat_p, flat_out = x.ravel(), p.ravel(), out.reshape(-1)
    ux, inverse = np.unique(flat_x, return_inverse=True)
    for k, xc in enumerate(ux):
        sel = inverse == k
        amp = overlap(wavefunction, float(xc), flat_p[sel], cs.lam, hbar, tolerance)
        flat_out[sel] = np.abs(amp) ** 2 / (2 * math.pi * hbar)
    return out if out.ndim else float(out)


def husimi_grid_exact(wavefunction: SampledWavefunction, xs, ps, lam: float, hbar: float = 1.0) -> np.ndarray:
    """Q on the tensor grid xs x ps, shape (len(xs), len(ps))."""
    xs, ps = np.asarray(xs, dtype=float), np.asarray(ps, dtype=float)
    out = np.empty((len(xs), len(ps)))
    for i, xc in enumerate(xs):
        out[i] = np.abs(overlap(wavefunction, float(xc), ps, lam, hbar)) ** 2 / (2 * math.pi * hbar)
    return out


def phase_space_norm(wavefunction: SampledWavefunction, lam: float, hbar: float = 1.0, p_max: float | None = None, density: float = 3.0) -> float:
    """Trapezoid integral of Q over a window that contains all of its mass."""
    lo, hi = wavefunction.support
    if p_max is None:
        p_max = 2 * math.pi * hbar / wavefunction.wavelength
    xs = np.arange(lo - 6 * lam, hi + 6 * lam + lam / density, lam / density)
    dp = hbar / (lam * density)
    pm = p_max + 8 * hbar / lam
    ps = np.arange(-pm, pm + dp, dp)
    q = husimi_grid_exact(wavefunction, xs, ps, lam, hbar)
    return float(np.trapezoid(np.trapezoid(q, ps, axis=1), xs))


# ---------------------------------------------------------------------------
# the classical window and the WKB closed form


@dataclass(frozen=True, eq=False)
class ClassicalWindow:
    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    nonempty: np.ndarray

    @property
    def middle(self) -> np.ndarray:
        """Geometric midpoint sqrt(lambda- lambda+)."""
        return np.sqrt(self.lambda_minus * self.lambda_plus)


def _state(spec_or_state, well) -> WKBState:
    return spec_or_state if isinstance(spec_or_state, WKBState) else WKBState(spec_or_state, well)


def classical_window(spec_or_state, well: PotentialWell | None = None, x=0.0, factor: float = WINDOW_FACTOR) -> ClassicalWindow:
    """lambda- = hbar/p(x); lambda+ = min((a+ - a-)/dn, sqrt(hbar/|p'(x)|)).

    ``nonempty`` requires lambda+ >= factor * lambda-. Outside (a-, a+) both
    ends are reported as inf/0 and the window is empty.
    """
    state = _state(spec_or_state, well)
    well = state.well
    x = np.asarray(x, dtype=float)
    p = state.momentum(x)
    inside = state.inside(x) & (p > 0)
    hb = well.hbar
    with np.errstate(divide="ignore", invalid="ignore"):
        lam_minus = np.where(inside, hb / p, np.inf)
        dp = -well.mass * well.force_gradient(x) / p
        lam_curv = np.where(dp != 0, np.sqrt(hb / np.abs(dp)), np.inf)
    band = state.spec.band
    lam_band = state.level.span / band if band > 0 else np.inf
    lam_plus = np.where(inside, np.minimum(lam_band, lam_curv), 0.0)
    nonempty = inside & (lam_plus >= factor * lam_minus)
    return ClassicalWindow(lam_minus, lam_plus, nonempty)


def _check_window(state: WKBState, x, lam, factor):
    win = classical_window(state, None, x, factor)
    bad = ~win.nonempty | (np.asarray(lam) * 1.0 > win.lambda_plus / math.sqrt(factor)) | (np.asarray(lam) * 1.0 < win.lambda_minus * math.sqrt(factor))
    return win, bad


def _wkb_terms(state: WKBState, x, t):
    env = state.envelopes(x, t)
    p0 = state.momentum(x)
    phase = state.interference_phase(x, t, env)
    return env, p0, phase


def husimi_wkb(spec_or_state, well: PotentialWell | None, x, p, lam: float, t: float = 0.0, factor: float = WINDOW_FACTOR, warn: bool = True):
    """Three-term Gaussian closed form of Q from the envelopes.

    (lam/(sqrt(pi) hbar)) [e^{-lam^2 (p+p0)^2/hbar^2} rho- + e^{-lam^2 (p-p0)^2/hbar^2} rho+
    - 2 e^{-lam^2 (p^2+p0^2)/hbar^2} cos(2S/hbar + phi+ - phi-) sqrt(rho+ rho-)]

    Points whose window does not hold ``lam`` comfortably (a factor sqrt(factor)
    from either end) trigger :class:`HusimiWindowWarning`; values are still
    returned. Turning-point exclusion zones give NaN.
    """
    state = _state(spec_or_state, well)
    hb = state.well.hbar
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    env, p0, phase = _wkb_terms(state, x, t)
    _, bad = _check_window(state, x, lam, factor)
    if warn and np.any(bad & env.valid):
        warnings.warn(f"lambda={lam:.4g} outside the classical window at {int(np.sum(bad & env.valid))} point(s)", HusimiWindowWarning, stacklevel=2)
    u = lam / hb
    cross = np.sqrt(env.rho_plus * env.rho_minus) * np.cos(np.nan_to_num(phase))
    q = (lam / (math.sqrt(math.pi) * hb)) * (
        np.exp(-(u * (p + p0)) ** 2) * env.rho_minus
        + np.exp(-(u * (p - p0)) ** 2) * env.rho_plus
        - 2.0 * np.exp(-(u**2) * (p**2 + p0**2)) * cross
    )
    return np.where(env.valid, q, np.nan)


@dataclass(frozen=True)
class ClassicalFormReport:
    weight_plus: float
    weight_minus: float
    mean_p_plus_branch: float
    mean_p_minus_branch: float
    std_p_plus_branch: float
    std_p_minus_branch: float
    rho_weight_plus: float
    rho_weight_minus: float
    momentum: float


def _branch_moments(ps, q):
    pos = ps > 0
    neg = ps < 0
    qz = np.where(ps == 0, 0.5 * q, q)
    out = []
    for mask in (pos | (ps == 0), neg | (ps == 0)):
        w = np.trapezoid(np.where(mask, qz, 0.0), ps)
        mean = np.trapezoid(np.where(mask, qz * ps, 0.0), ps) / w
        var = np.trapezoid(np.where(mask, qz * (ps - mean) ** 2, 0.0), ps) / w
        out.append((w, mean, math.sqrt(max(var, 0.0))))
    return out


def momentum_axis(p0: float, lam: float, hbar: float = 1.0, density: float = 16.0, reach: float = 8.0) -> np.ndarray:
    """Symmetric p-grid through 0 covering +-(p0 + reach hbar/lam)."""
    dp = hbar / (lam * density)
    pm = p0 + reach * hbar / lam
    n = math.ceil(pm / dp)
    return dp * np.arange(-n, n + 1)


def classical_form_check(
    spec_or_state,
    well: PotentialWell | None,
    x: float,
    lam: float,
    t: float = 0.0,
    mode: str = "wkb",
    wavefunction: SampledWavefunction | None = None,
    factor: float = WINDOW_FACTOR,
) -> ClassicalFormReport:
    """Branch weights, mean momenta and widths of Q(x, .) split at p = 0.

    ``mode="wkb"`` integrates the closed form; ``mode="exact"`` integrates
    husimi_exact of ``wavefunction``. The envelope reference weights
    rho+-/(rho+ + rho-) and p(x) are reported alongside.
    """
    state = _state(spec_or_state, well)
    hb = state.well.hbar
    win = classical_window(state, None, np.array([x]), factor)
    if not win.nonempty[0] or not (win.lambda_minus[0] < lam < win.lambda_plus[0]):
        raise ValueError(f"lambda={lam:.4g} is outside the classical window at x={x:.4g}")
    env = state.envelopes(np.array([x]), t)
    p0 = float(state.momentum(np.array([x]))[0])
    ps = momentum_axis(p0, lam, hb)
    if mode == "wkb":
        q = husimi_wkb(state, None, np.full(ps.shape, x), ps, lam, t, factor, warn=False)
    elif mode == "exact":
        if wavefunction is None:
            raise ValueError("exact mode needs a sampled wavefunction")
        q = husimi_exact(wavefunction, CoherentStateParams(np.full(ps.shape, x), ps, lam), hb)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    (wp, mp, sp), (wm, mm, sm) = _branch_moments(ps, q)
    total = wp + wm
    rp, rm = float(env.rho_plus[0]), float(env.rho_minus[0])
    return ClassicalFormReport(wp / total, wm / total, mp, mm, sp, sm, rp / (rp + rm), rm / (rp + rm), p0)


# ---------------------------------------------------------------------------
# degenerate limits


def _momentum_wavefunction(wavefunction: SampledWavefunction, p, hbar: float = 1.0, taper: float = 0.02):
    """<p|psi> by a direct discrete Fourier sum over the sampled grid, edges tapered."""
    if wavefunction.grid is None:
        raise ValueError("momentum transform needs grid samples")
    grid = wavefunction.grid
    values = wavefunction.values
    n = len(grid)
    window = np.ones(n)
    m = max(1, int(taper * n))
    ramp = 0.5 * (1 - np.cos(np.pi * np.arange(m) / m))
    window[:m] = ramp
    window[-m:] = ramp[::-1]
    dx = grid[1] - grid[0]
    p = np.asarray(p, dtype=float)
    kernel = np.exp(-1j * np.multiply.outer(p, grid) / hbar)
    return (kernel @ (values * window)) * dx / math.sqrt(2 * math.pi * hbar)


@dataclass(frozen=True, eq=False)
class LimitComparison:
    approx: np.ndarray
    reference: np.ndarray

    def relative_deviation(self, floor: float = 0.1) -> float:
        """max |approx/reference - 1| where reference exceeds ``floor`` of its maximum."""
        mask = self.reference > floor * np.max(self.reference)
        return float(np.max(np.abs(self.approx[mask] / self.reference[mask] - 1.0)))


def limit_small_lambda(wavefunction: SampledWavefunction, x, p, lam: float, hbar: float = 1.0, lambda_minus=None) -> LimitComparison:
    """(lam/(sqrt(pi) hbar)) e^{-lam^2 p^2/hbar^2} |psi(x)|^2 against exact Q.

    With ``lambda_minus`` given (per x or scalar) the precondition
    lam <= lambda_minus / 5 is enforced.
    """
    if lambda_minus is not None and np.any(lam > np.asarray(lambda_minus) / LIMIT_FACTOR):
        raise ValueError("small-lambda limit needs lam <= lambda_minus / 5")
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    dens = np.abs(wavefunction(x)) ** 2
    approx = lam / (math.sqrt(math.pi) * hbar) * np.exp(-((lam * p / hbar) ** 2)) * dens
    ref = husimi_exact(wavefunction, CoherentStateParams(x, p, lam), hbar)
    return LimitComparison(approx, np.asarray(ref))


def limit_large_lambda(wavefunction: SampledWavefunction, x, p, lam: float, hbar: float = 1.0, lambda_plus: float | None = None, span: float | None = None, center: float = 0.0) -> LimitComparison:
    """(1/(sqrt(pi) lam)) e^{-(x-c)^2/lam^2} |<p|psi>|^2 against exact Q.

    ``center`` is the origin of the well coordinate. With ``lambda_plus`` and
    ``span`` (a+ - a-) supplied, lam >= 5 max(lambda+, span) is enforced.
    """
    if lambda_plus is not None and lam < LIMIT_FACTOR * lambda_plus:
        raise ValueError("large-lambda limit needs lam >= 5 lambda_plus")
    if span is not None and lam < LIMIT_FACTOR * span:
        raise ValueError("large-lambda limit needs lam >= 5 (a+ - a-)")
    x, p = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(p, dtype=float))
    up, inverse = np.unique(p.ravel(), return_inverse=True)
    mom = np.abs(_momentum_wavefunction(wavefunction, up, hbar)) ** 2
    approx = np.exp(-(((x - center) / lam) ** 2)) / (math.sqrt(math.pi) * lam) * mom[inverse].reshape(x.shape)
    ref = husimi_exact(wavefunction, CoherentStateParams(x, p, lam), hbar)
    return LimitComparison(approx, np.asarray(ref))


# ---------------------------------------------------------------------------
# mean observed velocity


def mean_velocity_wkb(spec_or_state, well: PotentialWell | None, x, lam: float, t: float = 0.0):
    """v_cl (rho+ - rho-) / (rho+ + rho- - 2 e^{-lam^2 p^2/hbar^2} sqrt(rho+ rho-) cos(...)).

    First moments of the closed form; the interference term is odd-free in p.
    """
    state = _state(spec_or_state, well)
    x = np.asarray(x, dtype=float)
    env, p0, phase = _wkb_terms(state, x, t)
    u = lam * p0 / state.well.hbar
    marginal = env.rho_bar - 2.0 * np.exp(-(u**2)) * np.sqrt(env.rho_plus * env.rho_minus) * np.cos(np.nan_to_num(phase))
    if np.any(env.valid & ~(marginal > 0)):
        raise VanishingMarginal("p-marginal of Q vanishes")
    v = state.classical_speed(x) * (env.rho_plus - env.rho_minus) / marginal
    return np.where(env.valid, v, np.nan)


def mean_velocity_exact(wavefunction: SampledWavefunction, x, lam: float, hbar: float = 1.0, mass: float = 1.0, p_max: float | None = None):
    """int p Q dp / (m int Q dp) with Q from quadrature of the overlap."""
    if p_max is None:
        p_max = 2 * math.pi * hbar / wavefunction.wavelength
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.shape)
    ps = momentum_axis(p_max, lam, hbar, density=4.0)
    for i, xc in enumerate(x.ravel()):
        q = np.abs(overlap(wavefunction, float(xc), ps, lam, hbar)) ** 2
        marginal = np.trapezoid(q, ps)
        if not marginal > 0:
            raise VanishingMarginal(f"p-marginal of Q vanishes at x={xc:.6g}")
        out.flat[i] = np.trapezoid(ps * q, ps) / (mass * marginal)
    return out


def mean_velocity_smoothed(psi: ExactSuperposition, x, lam: float, t: float = 0.0, points: int = 801):
    """Independent route: Gaussian-smoothed current over Gaussian-smoothed density.

    Equal to the Husimi mean velocity identically in lam; used as an oracle.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo, hi = psi.support
    out = np.empty(x.shape)
    for i, xc in enumerate(x.ravel()):
        a, b = max(lo, xc - 7 * lam), min(hi, xc + 7 * lam)
        nodes, weights = _panel_nodes(a, b, (b - a) / max(1, points // GL_ORDER))
        val, der = psi.value_and_derivative(nodes, t)
        j = psi.hbar * np.imag(np.conj(val) * der) / psi.mass
        g = np.exp(-((nodes - xc) ** 2) / lam**2) * weights
        out.flat[i] = np.sum(g * j) / np.sum(g * np.abs(val) ** 2)
    return out


def mean_velocity(source, well: PotentialWell | None, x, lam: float, t: float = 0.0, mode: str = "wkb"):
    """v_bar_lambda(x). ``source`` is a spec/WKBState (mode "wkb") or a SampledWavefunction (mode "exact")."""
    if mode == "wkb":
        return mean_velocity_wkb(source, well, x, lam, t)
    if mode == "exact":
        hb = well.hbar if well is not None else 1.0
        m = well.mass if well is not None else 1.0
        return mean_velocity_exact(source, x, lam, hb, m)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True, eq=False)
class BohmLimitReport:
    lambdas: np.ndarray
    mean_velocities: np.ndarray
    v_bohm: float
    scale: float
    deviations: np.ndarray

    @property
    def relative(self) -> np.ndarray:
        return self.deviations / self.scale

    def monotone(self, noise: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.deviations) <= noise * self.scale))


def bohm_limit_check(
    spec_or_state,
    well: PotentialWell | None,
    x: float,
    t: float,
    lambda_sequence,
    reference: str = "wkb",
    psi: ExactSuperposition | None = None,
    mean_mode: str = "exact",
) -> BohmLimitReport:
    """|v_bar_lambda(x) - v_B(x)| along a decreasing lambda sequence.

    ``reference`` picks v_B: "wkb" (semiclassical) or "exact" (oracle
    wavefunction ``psi``). ``mean_mode`` picks how v_bar_lambda is evaluated;
    "exact" uses quadrature on ``psi``. Deviations are scaled by
    max(|v_B|, v_cl(x)).
    """
    state = _state(spec_or_state, well)
    well = state.well
    lams = np.asarray(lambda_sequence, dtype=float)
    if np.any(np.diff(lams) >= 0):
        raise ValueError("lambda sequence must be strictly decreasing")
    xa = np.array([x])
    if reference == "wkb":
        vb = float(bohm_velocity_wkb(state, None, xa, t)[0])
    elif reference == "exact":
        if psi is None:
            raise ValueError("exact reference needs the oracle superposition")
        vb = float(bohm_velocity_exact(psi, xa, t, well.hbar, well.mass)[0])
    else:
        raise ValueError(f"unknown reference {reference!r}")
    if mean_mode == "exact":
        if psi is None:
            raise ValueError("exact mean velocity needs the oracle superposition")
        sampled = SampledWavefunction.from_superposition(psi, t, well)
        means = np.array([float(mean_velocity_exact(sampled, xa, lam, well.hbar, well.mass)[0]) for lam in lams])
    else:
        means = np.array([float(mean_velocity_wkb(state, None, xa, lam, t)[0]) for lam in lams])
    vcl = float(state.classical_speed(xa)[0])
    scale = max(abs(vb), vcl) if np.isfinite(vb) else vcl
    return BohmLimitReport(lams, means, vb, scale, np.abs(means - vb))


# ---------------------------------------------------------------------------
# CSV export


def write_phase_space_csv(path: str | Path, xs, ps, q, mode: str) -> None:
    """Rows (x, p, Q, mode) for the tensor grid xs x ps, x outermost."""
    if mode not in ("exact", "wkb"):
        raise ValueError(f"mode must be exact or wkb, got {mode!r}")
    q = np.asarray(q, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "p", "Q", "mode"])
        for i, xv in enumerate(xs):
            for j, pv in enumerate(ps):
                w.writerow([repr(float(xv)), repr(float(pv)), repr(float(q[i, j])), mode])


def write_window_csv(path: str | Path, xs, window: ClassicalWindow) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "lambda_minus", "lambda_plus", "nonempty"])
        for xv, lm, lp, ok in zip(xs, window.lambda_minus, window.lambda_plus, window.nonempty):
            w.writerow([repr(float(xv)), repr(float(lm)), repr(float(lp)), int(bool(ok))])
