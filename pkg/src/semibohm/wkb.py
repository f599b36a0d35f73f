"""WKB eigenfunctions, approximate-eigenstate superpositions and their envelopes.

All envelope quantities use the centre level's classical data (p, tau, T,
omega); per-level data only enters through the exact eigensolver.
Positions inside a turning-point exclusion zone evaluate to NaN ("flagged").
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .wells import (
    ClassicalLevel,
    PotentialWell,
    airy_length,
    classical_momentum,
    classical_time,
    reduced_action,
    solve_level,
)

DEFAULT_EXCLUSION = 3.0


class SpecError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SuperpositionSpec:
    """sum over r in [-band/2, band/2] of c_r |center_level + r>."""

    center_level: int
    band: int
    coefficients: np.ndarray
    level: ClassicalLevel
    max_band_ratio: float = 0.1
    strict: bool = True

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        object.__setattr__(self, "coefficients", c)
        if self.strict:
            problems = self.problems()
            if problems:
                raise SpecError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.band < 0 or self.band % 2:
            out.append(f"band must be a non-negative even integer, got {self.band}")
        if len(self.coefficients) != self.band + 1:
            out.append(f"expected {self.band + 1} coefficients, got {len(self.coefficients)}")
        norm = float(np.sum(np.abs(self.coefficients) ** 2))
        if abs(norm - 1.0) > 1e-12:
            out.append(f"sum |c_r|^2 = {norm:.15g}, not 1 within 1e-12")
        if self.band > self.max_band_ratio * self.center_level:
            out.append(f"band {self.band} exceeds {self.max_band_ratio} x center level {self.center_level}")
        if self.center_level - self.band // 2 < 0:
            out.append("center_level - band/2 must be >= 0")
        if self.level.index != self.center_level:
            out.append("level data does not belong to the center level")
        return out

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-(self.band // 2), self.band // 2 + 1)

    @property
    def levels(self) -> np.ndarray:
        return self.center_level + self.offsets

    def with_coefficients(self, coefficients) -> "SuperpositionSpec":
        return SuperpositionSpec(self.center_level, self.band, np.asarray(coefficients, dtype=complex), self.level, self.max_band_ratio, self.strict)

    def nonzero_terms(self):
        """(level index, coefficient) pairs with c_r != 0."""
        return [(int(n), c) for n, c in zip(self.levels, self.coefficients) if c != 0]


def make_spec(well: PotentialWell, center_level: int, band: int, coefficients, **kw) -> SuperpositionSpec:
    return SuperpositionSpec(center_level, band, np.asarray(coefficients, dtype=complex), solve_level(well, center_level), **kw)


def eigenstate_spec(well: PotentialWell, n: int) -> SuperpositionSpec:
    return make_spec(well, n, 0, [1.0])


# ---------------------------------------------------------------------------
# coefficient presets and CSV round trip


def coefficient_presets(kind: str, band: int, params: dict | None = None, seed: int | None = None) -> np.ndarray:
    """Normalised coefficient vectors for r = -band/2 .. band/2.

    gaussian_packet: c_r ~ exp(-r**2 / (4 sigma_r**2)) exp(i r theta0), params
    ``sigma_r`` (default band/6) and ``theta0`` (default 0).
    uniform_random_phase: equal moduli, phases uniform on [0, 2 pi) from ``seed``.
    two_level: params ``c`` (two amplitudes) placed at offsets ``offsets``
    (default (0, 1)).
    """
    params = dict(params or {})
    if band < 0 or band % 2:
        raise SpecError("band must be a non-negative even integer")
    r = np.arange(-(band // 2), band // 2 + 1)
    if kind == "gaussian_packet":
        sigma = float(params.get("sigma_r", band / 6 if band else 1.0))
        if sigma <= 0:
            raise SpecError(f"sigma_r must be positive, got {sigma}")
        theta0 = float(params.get("theta0", 0.0))
        c = np.exp(-(r**2) / (4 * sigma**2)) * np.exp(1j * r * theta0)
    elif kind == "uniform_random_phase":
        rng = np.random.default_rng(seed)
        c = np.exp(1j * rng.uniform(0.0, 2 * math.pi, size=len(r)))
    elif kind == "two_level":
        amps = np.asarray(params.get("c", (1.0, 1.0)), dtype=complex)
        offsets = params.get("offsets", (0, 1))
        if len(amps) != 2 or len(offsets) != 2:
            raise SpecError("two_level needs exactly two amplitudes and offsets")
        c = np.zeros(len(r), dtype=complex)
        for off, a in zip(offsets, amps):
            if abs(off) > band // 2:
                raise SpecError(f"offset {off} lies outside the band")
            c[off + band // 2] = a
    else:
        raise SpecError(f"unknown coefficient preset {kind!r}")
    c = np.asarray(c, dtype=complex)
    return c / math.sqrt(float(np.sum(np.abs(c) ** 2)))


def packet_phase(level: ClassicalLevel, well: PotentialWell, x_center: float, moving: str = "right") -> float:
    """theta0 that puts a gaussian packet's centre at ``x_center`` at t = 0."""
    tau = float(classical_time(well, level.energy, x_center, turning=(level.turning_left, level.turning_right)))
    omega = level.angular_frequency
    return -omega * tau if moving == "right" else omega * tau


def write_coefficients_csv(path: str | Path, spec_or_coeffs, offsets=None) -> None:
    if isinstance(spec_or_coeffs, SuperpositionSpec):
        coeffs, offsets = spec_or_coeffs.coefficients, spec_or_coeffs.offsets
    else:
        coeffs = np.asarray(spec_or_coeffs, dtype=complex)
        if offsets is None:
            half = (len(coeffs) - 1) // 2
            offsets = np.arange(-half, half + 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "re_c", "im_c"])
        for r, c in zip(offsets, coeffs):
            w.writerow([int(r), repr(float(c.real)), repr(float(c.imag))])


def read_coefficients_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["r", "re_c", "im_c"]:
            raise SpecError(f"{path}: expected header r,re_c,im_c")
        for row in reader:
            if row:
                rows.append((int(row[0]), float(row[1]) + 1j * float(row[2])))
    rows.sort()
    offsets = np.array([r for r, _ in rows])
    if len(offsets) and np.any(np.diff(offsets) != 1):
        raise SpecError(f"{path}: offsets must be consecutive")
    return offsets, np.array([c for _, c in rows], dtype=complex)


# ---------------------------------------------------------------------------
# envelopes


@dataclass(frozen=True, eq=False)
class EnvelopeField:
    g_plus: np.ndarray
    g_minus: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    phi_plus: np.ndarray
    phi_minus: np.ndarray
    rho_bar: np.ndarray
    valid: np.ndarray = field(repr=False)


def envelope_sums(spec: SuperpositionSpec, tau, t, direction: int = +1):
    """sum_r c_r exp(+- i r omega (tau -+ t)), the part of g+- without the amplitude.

    Depends on (tau, t) only through tau - t (direction +1) or tau + t (-1).
    """
    omega = spec.level.angular_frequency
    tau, t = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(t, dtype=float))
    arg = tau - t if direction > 0 else tau + t
    phase = np.exp(direction * 1j * omega * np.multiply.outer(arg, spec.offsets))
    return phase @ spec.coefficients


class WKBState:
    """Semiclassical evaluation of a :class:`SuperpositionSpec` in a well."""

    def __init__(self, spec: SuperpositionSpec, well: PotentialWell, exclusion: float = DEFAULT_EXCLUSION):
        self.spec = spec
        self.well = well
        self.level = spec.level
        self.exclusion = exclusion
        lv = self.level
        self.turning = (lv.turning_left, lv.turning_right)
        self.zone_left = exclusion * airy_length(well, lv.turning_left)
        self.zone_right = exclusion * airy_length(well, lv.turning_right)
        self._force_minus_zero = False

    # -- geometry -------------------------------------------------------
    @property
    def interior(self) -> tuple[float, float]:
        """Allowed interval with the exclusion zones removed."""
        return self.turning[0] + self.zone_left, self.turning[1] - self.zone_right

    def in_exclusion(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a_minus, a_plus = self.turning
        # the interior endpoints themselves count as evaluable despite rounding
        shrink = 1.0 - 1e-12
        return (np.abs(x - a_minus) < shrink * self.zone_left) | (np.abs(x - a_plus) < shrink * self.zone_right)

    def inside(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.turning[0]) & (x < self.turning[1])

    def _classical(self, x):
        """p, tau, S on the allowed part of x (others get placeholder values)."""
        x = np.asarray(x, dtype=float)
        # grids from meshgrid repeat positions; evaluate each distinct x once
        xc, inverse = np.unique(np.clip(x, *self.turning), return_inverse=True)
        e = self.level.energy
        p = np.asarray(classical_momentum(self.well, e, xc), dtype=float)
        tau = np.asarray(classical_time(self.well, e, xc, turning=self.turning), dtype=float)
        s = np.asarray(reduced_action(self.well, e, xc, turning=self.turning), dtype=float)
        return tuple(a[inverse].reshape(x.shape) for a in (p, tau, s))

    def momentum(self, x):
        return self._classical(x)[0]

    def classical_speed(self, x):
        return self.momentum(x) / self.well.mass

    def de_broglie(self, x):
        return self.well.h / self.momentum(x)

    # -- envelopes ------------------------------------------------------
    def envelopes(self, x, t) -> EnvelopeField:
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        p, tau, _ = self._classical(x)
        lv, m = self.level, self.well.mass
        inside = self.inside(x)
        flagged = self.in_exclusion(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            amp = np.where(inside & ~flagged, np.sqrt(m / (lv.period * p)), 0.0)
        gp = amp * envelope_sums(self.spec, tau, t, +1)
        gm = amp * envelope_sums(self.spec, tau, t, -1)
        if self._force_minus_zero:
            gm = np.zeros_like(gm)
        gp = np.where(flagged, np.nan, gp)
        gm = np.where(flagged, np.nan, gm)
        rp, rm = np.abs(gp) ** 2, np.abs(gm) ** 2
        php = np.where(rp > 0, np.angle(gp), np.nan)
        phm = np.where(rm > 0, np.angle(gm), np.nan)
        return EnvelopeField(gp, gm, rp, rm, php, phm, rp + rm, ~flagged)

    def right_mover_only(self) -> "WKBState":
        """Copy with g- forced to zero (test hook for the right-mover limit)."""
        other = WKBState(self.spec, self.well, self.exclusion)
        other._force_minus_zero = True
        return other

    # -- wavefunction ---------------------------------------------------
    def wavefunction(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        env = self.envelopes(x, t)
        _, _, s = self._classical(x)
        hb, e = self.well.hbar, self.level.energy
        return 1j * (np.exp(-1j * (s + e * t) / hb) * env.g_minus - np.exp(1j * (s - e * t) / hb) * env.g_plus)

    def interference_phase(self, x, t, env: EnvelopeField | None = None):
        """2 S(x)/hbar + phi+ - phi-."""
        env = env if env is not None else self.envelopes(x, t)
        _, _, s = self._classical(x)
        return 2.0 * s / self.well.hbar + env.phi_plus - env.phi_minus

    def density(self, x, t):
        """rho+ + rho- - 2 sqrt(rho+ rho-) cos(2S/hbar + phi+ - phi-)."""
        env = self.envelopes(x, t)
        cross = np.sqrt(env.rho_plus * env.rho_minus)
        cos = np.cos(np.nan_to_num(self.interference_phase(x, t, env)))
        dens = env.rho_bar - 2.0 * cross * cos
        return np.where(env.valid, dens, np.nan)


def wkb_eigenfunction(level: ClassicalLevel, well: PotentialWell, x, exclusion: float = DEFAULT_EXCLUSION):
    """2 sqrt(m / (T p)) sin(S / hbar) inside (a-, a+); 0 outside; NaN near turning points."""
    spec = SuperpositionSpec(level.index, 0, np.array([1.0 + 0j]), level, strict=False)
    st = WKBState(spec, well, exclusion)
    x = np.asarray(x, dtype=float)
    p, _, s = st._classical(x)
    inside = st.inside(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(inside, 2.0 * np.sqrt(well.mass / (level.period * p)) * np.sin(s / well.hbar), 0.0)
    val = np.where(st.in_exclusion(x), np.nan, val)
    return val if val.ndim else float(val)


def envelopes(spec, well, x, t, exclusion: float = DEFAULT_EXCLUSION) -> EnvelopeField:
    return WKBState(spec, well, exclusion).envelopes(x, t)


def wkb_wavefunction(spec, well, x, t, exclusion: float = DEFAULT_EXCLUSION):
    return WKBState(spec, well, exclusion).wavefunction(x, t)


def wkb_density(spec, well, x, t, exclusion: float = DEFAULT_EXCLUSION):
    return WKBState(spec, well, exclusion).density(x, t)
