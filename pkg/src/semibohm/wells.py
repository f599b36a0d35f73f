"""Potential wells, classical orbit quantities and WKB energy levels.

Everything here is a pure function of an immutable :class:`PotentialWell`.
Integrals with a ``1/p`` end-point singularity are done with the square-root
substitution ``x = a + u**2`` on each half of the orbit, followed by fixed
Gauss-Legendre quadrature, so grids of positions can be evaluated in one
vectorised call.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

ArrayLike = float | np.ndarray


class WellError(ValueError):
    """Invalid well definition or a query outside the classically allowed region."""


class BracketError(WellError):
    """An energy cannot be bracketed inside the well's domain."""


class QuadratureError(RuntimeError):
    """Quadrature failed to reach its tolerance."""

    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")
        self.error_estimate = error_estimate


_GL_HIGH = leggauss(64)
_GL_LOW = leggauss(32)


@dataclass(frozen=True)
class PotentialWell:
    """A confining single-minimum potential on a closed interval.

    ``potential`` and ``potential_derivative`` must accept numpy arrays.
    When no derivative is given a central difference with step
    ``1e-6 * (x_max - x_min)`` is used.
    """

    potential: Callable[[ArrayLike], ArrayLike]
    domain: tuple[float, float]
    mass: float = 1.0
    hbar: float = 1.0
    potential_derivative: Callable[[ArrayLike], ArrayLike] | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)
    scan_points: int = 4001

    def __post_init__(self):
        lo, hi = self.domain
        if not hi > lo:
            raise WellError(f"domain must satisfy x_min < x_max, got {self.domain}")
        if self.mass <= 0 or self.hbar <= 0:
            raise WellError("mass and hbar must be positive")
        xs = np.linspace(lo, hi, self.scan_points)
        vs = np.asarray(self.potential(xs), dtype=float)
        if not np.all(np.isfinite(vs)):
            raise WellError("potential is not finite on the domain")
        dv = np.asarray(self.force_gradient(xs), dtype=float)
        signs = np.sign(dv)
        signs = signs[signs != 0]
        changes = int(np.count_nonzero(np.diff(signs)))
        if changes != 1 or signs[0] > 0:
            raise WellError(
                f"potential must have exactly one minimum inside the domain "
                f"(derivative changes sign {changes} times on the scan grid)"
            )

    @property
    def h(self) -> float:
        return 2.0 * math.pi * self.hbar

    @property
    def width(self) -> float:
        return self.domain[1] - self.domain[0]

    def V(self, x: ArrayLike) -> ArrayLike:
        return self.potential(x)

    def force_gradient(self, x: ArrayLike) -> ArrayLike:
        """dV/dx, analytic when supplied, otherwise a central difference."""
        if self.potential_derivative is not None:
            return self.potential_derivative(x)
        step = 1e-6 * self.width
        x = np.asarray(x, dtype=float)
        return (self.potential(x + step) - self.potential(x - step)) / (2.0 * step)

    @cached_property
    def minimum(self) -> tuple[float, float]:
        """(x, V) at the bottom of the well."""
        lo, hi = self.domain
        xs = np.linspace(lo, hi, self.scan_points)
        i = int(np.argmin(self.potential(xs)))
        a, b = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        da, db = self.force_gradient(a), self.force_gradient(b)
        if da < 0 < db:
            x0 = brentq(lambda x: float(self.force_gradient(x)), a, b, xtol=1e-14 * self.width)
        else:
            x0 = xs[i]
        return float(x0), float(self.potential(x0))

    @property
    def max_confined_energy(self) -> float:
        lo, hi = self.domain
        return float(min(self.potential(lo), self.potential(hi)))

    def checksum_key(self) -> str:
        """Stable identifier for caching solved eigenpairs."""
        lo, hi = self.domain
        xs = np.linspace(lo, hi, 257)
        vs = np.asarray(self.potential(xs), dtype=float)
        return f"{self.name}|{self.mass!r}|{self.hbar!r}|{lo!r}|{hi!r}|" + vs.round(12).tobytes().hex()[:64]


@dataclass(frozen=True)
class ClassicalLevel:
    index: int
    energy: float
    turning_left: float
    turning_right: float
    period: float

    @property
    def angular_frequency(self) -> float:
        return 2.0 * math.pi / self.period

    @property
    def span(self) -> float:
        return self.turning_right - self.turning_left


# ---------------------------------------------------------------------------
# built-in wells


def harmonic(omega: float = 1.0, mass: float = 1.0, hbar: float = 1.0, half_width: float = 60.0) -> PotentialWell:
    k = mass * omega**2
    return PotentialWell(
        potential=lambda x: 0.5 * k * np.asarray(x, dtype=float) ** 2,
        potential_derivative=lambda x: k * np.asarray(x, dtype=float),
        domain=(-half_width, half_width),
        mass=mass,
        hbar=hbar,
        name="harmonic",
        params={"omega": omega},
    )


def quartic(coefficient: float = 1.0, mass: float = 1.0, hbar: float = 1.0, half_width: float = 10.0) -> PotentialWell:
    return PotentialWell(
        potential=lambda x: coefficient * np.asarray(x, dtype=float) ** 4,
        potential_derivative=lambda x: 4.0 * coefficient * np.asarray(x, dtype=float) ** 3,
        domain=(-half_width, half_width),
        mass=mass,
        hbar=hbar,
        name="quartic",
        params={"coefficient": coefficient},
    )


def harmonic_cubic(cubic: float = 0.1, mass: float = 1.0, hbar: float = 1.0, domain: tuple[float, float] | None = None) -> PotentialWell:
    """V = x**2 + cubic * x**3, restricted to the confining side of the barrier.

    The barrier top sits at ``x = -2/(3 cubic)``; the default domain stops just
    short of it on the left and extends symmetrically on the right.
    """
    if cubic == 0:
        raise WellError("use harmonic() for a vanishing cubic term")
    barrier = -2.0 / (3.0 * cubic)
    if domain is None:
        edge = 0.98 * abs(barrier)
        domain = (-edge, edge) if cubic > 0 else (-edge, edge)
    return PotentialWell(
        potential=lambda x: np.asarray(x, dtype=float) ** 2 + cubic * np.asarray(x, dtype=float) ** 3,
        potential_derivative=lambda x: 2.0 * np.asarray(x, dtype=float) + 3.0 * cubic * np.asarray(x, dtype=float) ** 2,
        domain=domain,
        mass=mass,
        hbar=hbar,
        name="harmonic_cubic",
        params={"cubic": cubic},
    )


def tabulated(xs, vs, mass: float = 1.0, hbar: float = 1.0, name: str = "tabulated") -> PotentialWell:
    """Cubic-spline potential through the points (xs, vs); xs strictly increasing."""
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if xs.ndim != 1 or xs.shape != vs.shape or len(xs) < 4:
        raise WellError("tabulated potential needs matching 1-D arrays of at least 4 points")
    if np.any(np.diff(xs) <= 0):
        raise WellError("tabulated x values must be strictly increasing")
    spline = CubicSpline(xs, vs)
    deriv = spline.derivative()
    return PotentialWell(
        potential=lambda x: spline(np.asarray(x, dtype=float)),
        potential_derivative=lambda x: deriv(np.asarray(x, dtype=float)),
        domain=(float(xs[0]), float(xs[-1])),
        mass=mass,
        hbar=hbar,
        name=name,
        params={"points": len(xs)},
    )


def read_potential_csv(path: str | Path, mass: float = 1.0, hbar: float = 1.0) -> PotentialWell:
    """Load a two-column (x, V) CSV; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if i == 0:
                    continue
                raise WellError(f"{path}: bad row {i + 1}: {row!r}") from None
    xs, vs = zip(*rows)
    return tabulated(xs, vs, mass=mass, hbar=hbar, name=f"tabulated:{Path(path).name}")


# ---------------------------------------------------------------------------
# classical quantities


def classical_momentum(well: PotentialWell, energy: float, x: ArrayLike, tol: float = 1e-9) -> ArrayLike:
    """sqrt(2 m (E - V(x))); raises if V(x) exceeds E by more than ``tol * max(1, |E|)``."""
    kinetic = energy - np.asarray(well.V(x), dtype=float)
    if np.any(kinetic < -tol * max(1.0, abs(energy))):
        raise WellError(f"classically forbidden position for E={energy}")
    p = np.sqrt(2.0 * well.mass * np.clip(kinetic, 0.0, None))
    return p if np.ndim(p) else float(p)


def turning_points(well: PotentialWell, energy: float, rtol: float = 4 * np.finfo(float).eps) -> tuple[float, float]:
    x0, v0 = well.minimum
    if energy <= v0:
        raise WellError(f"energy {energy} is not above the well minimum {v0}")
    lo, hi = well.domain
    if well.V(lo) < energy or well.V(hi) < energy:
        raise BracketError(f"energy {energy} is not confined by the domain {well.domain}")
    f = lambda x: float(well.V(x)) - energy
    xtol = 1e-300
    rtol = max(rtol, 4 * np.finfo(float).eps)
    left = brentq(f, lo, x0, xtol=xtol, rtol=rtol) if f(lo) != 0 else lo
    right = brentq(f, x0, hi, xtol=xtol, rtol=rtol) if f(hi) != 0 else hi
    return float(left), float(right)


def _half_integrals(well, energy, a_minus, a_plus, x, kind, nodes):
    """Integrals of ``p`` or ``m/p`` from the nearest end of the orbit.

    Returns (from_left, from_right) where from_left is the integral over
    [a_minus, x] and from_right over [x, a_plus], both via the substitution
    x' = a + u**2.
    """
    u_nodes, u_weights = nodes
    x = np.atleast_1d(np.asarray(x, dtype=float))

    span = a_plus - a_minus
    slopes = {}

    def integrand(xp, anchor, s):
        # measured from V(anchor) so a turning point that is off by the root
        # tolerance does not leave a sqrt kink near u = 0
        kinetic = float(well.V(anchor)) - np.asarray(well.V(xp), dtype=float)
        # right next to the anchor that difference cancels catastrophically; use a Taylor
        # form in the offset s, which is exact where xp - anchor is not
        near = np.abs(s) < 1e-6 * span
        if np.any(near):
            if anchor not in slopes:
                h = 1e-3 * span
                d1 = float(well.force_gradient(anchor))
                d2 = float(well.force_gradient(anchor + h) - well.force_gradient(anchor - h)) / (2 * h)
                slopes[anchor] = (d1, d2)
            d1, d2 = slopes[anchor]
            kinetic = np.where(near, -(d1 * s + 0.5 * d2 * s**2), kinetic)
        kinetic = np.clip(kinetic, 0.0, None)
        p = np.sqrt(2.0 * well.mass * kinetic)
        if kind == "action":
            return p
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(p > 0, well.mass / p, 0.0)

    def sub_integral(anchor, length, direction):
        # integral over [anchor, anchor + direction*length] in x, with u in [0, sqrt(length)]
        umax = np.sqrt(np.clip(length, 0.0, None))[:, None]
        u = 0.5 * umax * (u_nodes[None, :] + 1.0)
        offset = direction * u**2
        vals = integrand(anchor + offset, anchor, offset) * 2.0 * u
        return (0.5 * umax[:, 0]) * (vals @ u_weights)

    from_left = sub_integral(a_minus, x - a_minus, +1.0)
    from_right = sub_integral(a_plus, a_plus - x, -1.0)
    return from_left, from_right


def _orbit_integral(well, energy, x, kind, tol=1e-10, turning=None):
    a_minus, a_plus = turning if turning is not None else turning_points(well, energy)
    mid = 0.5 * (a_minus + a_plus)
    scalar = np.ndim(x) == 0
    shape = np.shape(x)
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if np.any(x < a_minus - 1e-9 * well.width) or np.any(x > a_plus + 1e-9 * well.width):
        raise WellError("position outside the classically allowed interval")
    x = np.clip(x, a_minus, a_plus)

    def evaluate(nodes):
        pts = np.concatenate([x, [mid]])
        left, right = _half_integrals(well, energy, a_minus, a_plus, pts, kind, nodes)
        half_l, half_r = left[-1], right[-1]
        left, right = left[:-1], right[:-1]
        out = np.where(x <= mid, left, half_l + half_r - right)
        return out, half_l + half_r

    hi, total_hi = evaluate(_GL_HIGH)
    lo, total_lo = evaluate(_GL_LOW)
    err = float(np.max(np.abs(np.concatenate([hi - lo, [total_hi - total_lo]]))))
    scale = max(abs(total_hi), 1e-300)
    if err > tol * scale:
        raise QuadratureError(f"orbit {kind} integral did not converge", err)
    return (float(hi[0]) if scalar else hi.reshape(shape)), float(total_hi)


def classical_time(well: PotentialWell, energy: float, x: ArrayLike, turning=None) -> ArrayLike:
    """Classical time from the left turning point to x."""
    tau, _ = _orbit_integral(well, energy, x, "time", turning=turning)
    return tau


def period(well: PotentialWell, energy: float, turning=None) -> float:
    a_minus, a_plus = turning if turning is not None else turning_points(well, energy)
    _, half = _orbit_integral(well, energy, a_plus, "time", turning=(a_minus, a_plus))
    return 2.0 * half


def reduced_action(well: PotentialWell, energy: float, x: ArrayLike, turning=None) -> ArrayLike:
    """S(x) = integral of p from the left turning point to x, plus h/8."""
    s, _ = _orbit_integral(well, energy, x, "action", turning=turning)
    return s + well.h / 8.0


def orbit_action(well: PotentialWell, energy: float) -> float:
    """Integral of p over [a-, a+] (half the closed-orbit action)."""
    a_minus, a_plus = turning_points(well, energy)
    _, total = _orbit_integral(well, energy, a_plus, "action", turning=(a_minus, a_plus))
    return total


def solve_level(well: PotentialWell, n: int, rtol: float = 1e-14) -> ClassicalLevel:
    """Bohr-Sommerfeld level: integral of p over [a-, a+] = (2n+1) h/4."""
    if n < 0:
        raise WellError("level index must be non-negative")
    target = (2 * n + 1) * well.h / 4.0
    _, v0 = well.minimum
    e_cap = well.max_confined_energy

    def excess(e):
        return orbit_action(well, e) - target

    scale = max(abs(v0), well.hbar**2 / (well.mass * well.width**2), 1e-12)
    gap = scale * 1e-6
    lower = v0 + gap
    while excess(lower) > 0:
        gap *= 1e-3
        lower = v0 + gap
        if gap < 1e-300:
            raise WellError("cannot bracket the level from below")
    step = max(scale, 1e-6)
    upper = v0 + step
    while True:
        if upper >= e_cap:
            upper = e_cap * (1 - 1e-12) if e_cap > 0 else e_cap - 1e-12 * abs(e_cap)
            if excess(upper) < 0:
                raise BracketError(
                    f"level {n} lies above the confinement range of the domain (max confined energy {e_cap:.6g})"
                )
            break
        if excess(upper) >= 0:
            break
        lower = upper
        step *= 2.0
        upper = v0 + step
    energy = brentq(excess, lower, upper, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps), maxiter=500)
    a_minus, a_plus = turning_points(well, energy)
    return ClassicalLevel(
        index=n,
        energy=float(energy),
        turning_left=a_minus,
        turning_right=a_plus,
        period=period(well, energy, turning=(a_minus, a_plus)),
    )


def quantization_residual(well: PotentialWell, level: ClassicalLevel) -> float:
    return orbit_action(well, level.energy) - (2 * level.index + 1) * well.h / 4.0


def airy_length(well: PotentialWell, turning_point: float) -> float:
    slope = abs(float(well.force_gradient(turning_point)))
    return (well.hbar**2 / (2.0 * well.mass * slope)) ** (1.0 / 3.0)
