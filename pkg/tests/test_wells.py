import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from semibohm.eigensolver import richardson_energies
from semibohm.wells import (
    BracketError,
    PotentialWell,
    WellError,
    airy_length,
    classical_momentum,
    classical_time,
    harmonic,
    harmonic_cubic,
    orbit_action,
    period,
    quantization_residual,
    quartic,
    read_potential_csv,
    reduced_action,
    solve_level,
    tabulated,
    turning_points,
)


class TestMomentumAndTurningPoints:
    def test_harmonic_centre(self, hwell):
        assert classical_momentum(hwell, 0.5, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_zero_at_turning_point(self, qwell):
        a_minus, a_plus = turning_points(qwell, 3.7)
        assert classical_momentum(qwell, 3.7, a_plus) == pytest.approx(0.0, abs=1e-6)
        assert classical_momentum(qwell, 3.7, a_minus) == pytest.approx(0.0, abs=1e-6)

    def test_forbidden_region_raises(self, hwell):
        with pytest.raises(WellError):
            classical_momentum(hwell, 0.5, 2.0)

    def test_quartic_against_integrated_orbit(self, qwell):
        assert classical_momentum(qwell, 1.0, 0.0) == pytest.approx(math.sqrt(2.0), rel=1e-15)
        # Hamilton's equations from (0, sqrt 2); p(x) must match the orbit's |p| at each visited x
        sol = solve_ivp(lambda t, y: [y[1], -4 * y[0] ** 3], (0, 0.6), [0.0, math.sqrt(2.0)], rtol=1e-12, atol=1e-12, dense_output=True)
        ts = np.linspace(0, 0.6, 50)
        x, p = sol.sol(ts)
        assert np.allclose(classical_momentum(qwell, 1.0, x), np.abs(p), rtol=1e-8)

    def test_symmetric_turning_points(self, hwell, qwell):
        assert turning_points(hwell, 0.5) == pytest.approx((-1.0, 1.0), abs=1e-12)
        assert turning_points(qwell, 1.0) == pytest.approx((-1.0, 1.0), abs=1e-12)

    def test_asymmetric_roots(self):
        well = harmonic_cubic(0.1)
        a, b = turning_points(well, 0.5)
        assert a < 0 < b and abs(a) != pytest.approx(abs(b))
        assert abs(float(well.V(a)) - 0.5) < 1e-10
        assert abs(float(well.V(b)) - 0.5) < 1e-10

    def test_energy_below_minimum(self, hwell):
        with pytest.raises(WellError):
            turning_points(hwell, -1.0)

    def test_unconfined_energy(self):
        with pytest.raises(BracketError):
            turning_points(harmonic(half_width=3.0), 10.0)


class TestOrbitIntegrals:
    @pytest.mark.parametrize("energy", [0.5, 7.0, 120.5])
    def test_harmonic_quarter_and_half_period(self, hwell, energy):
        a, b = turning_points(hwell, energy)
        assert classical_time(hwell, energy, 0.0) == pytest.approx(math.pi / 2, rel=1e-10)
        assert classical_time(hwell, energy, b) == pytest.approx(math.pi, rel=1e-10)
        assert period(hwell, energy) == pytest.approx(2 * math.pi, rel=1e-10)

    def test_action_endpoints(self, hwell):
        n = 30
        e = n + 0.5
        a, b = turning_points(hwell, e)
        assert reduced_action(hwell, e, a) == pytest.approx(math.pi / 4, abs=1e-12)
        assert reduced_action(hwell, e, b) == pytest.approx((n + 0.5) * math.pi + math.pi / 4, rel=1e-12)

    @pytest.mark.parametrize("well_name", ["harmonic", "quartic", "cubic"])
    def test_action_derivative_is_momentum(self, well_name):
        well = {"harmonic": harmonic(), "quartic": quartic(), "cubic": harmonic_cubic(0.1)}[well_name]
        e = solve_level(well, 10).energy
        a, b = turning_points(well, e)
        x = np.linspace(a, b, 60)[5:-5]
        h = 1e-5 * (b - a)
        ds = (reduced_action(well, e, x + h) - reduced_action(well, e, x - h)) / (2 * h)
        assert np.max(np.abs(ds / classical_momentum(well, e, x) - 1)) < 1e-6

    def test_time_monotone(self, qwell):
        e = 4.0
        a, b = turning_points(qwell, e)
        tau = classical_time(qwell, e, np.linspace(a, b, 200))
        assert np.all(np.diff(tau) > 0)
        assert tau[-1] == pytest.approx(period(qwell, e) / 2, rel=1e-12)

    def test_quartic_period_against_orbit(self, qwell):
        # quarter period from x=0 to a+ by direct integration of Hamilton's equations
        hit = lambda t, y: y[1]
        hit.terminal, hit.direction = True, -1
        sol = solve_ivp(lambda t, y: [y[1], -4 * y[0] ** 3], (0, 10), [0.0, math.sqrt(2.0)], rtol=1e-12, atol=1e-12, events=hit)
        assert period(qwell, 1.0) == pytest.approx(4 * sol.t_events[0][0], rel=1e-8)

    def test_array_shapes(self, hwell):
        x = np.zeros((3, 4))
        assert classical_time(hwell, 2.0, x).shape == (3, 4)


class TestSolveLevel:
    def test_harmonic_exact(self, hwell):
        assert solve_level(hwell, 100).energy == pytest.approx(100.5, rel=1e-12)

    def test_quartic_against_numerov(self, qwell):
        e_wkb = solve_level(qwell, 50).energy
        e_num = float(richardson_energies(qwell, [50])[0])
        assert abs(e_wkb - e_num) / e_num < 1e-3

    def test_quartic_spacing_matches_frequency(self, qwell):
        lv = solve_level(qwell, 100)
        gap = solve_level(qwell, 101).energy - lv.energy
        assert gap == pytest.approx(qwell.hbar * lv.angular_frequency, rel=0.01)

    def test_quantization_residual(self, qwell):
        for n in (0, 5, 60):
            assert abs(quantization_residual(qwell, solve_level(qwell, n))) < 1e-9

    def test_monotone_spectrum(self):
        well = harmonic_cubic(0.1)
        energies = [solve_level(well, n).energy for n in range(0, 12)]
        assert np.all(np.diff(energies) > 0)

    def test_level_above_confinement(self):
        with pytest.raises(BracketError):
            solve_level(harmonic(half_width=5.0), 200)

    def test_negative_index(self, hwell):
        with pytest.raises(WellError):
            solve_level(hwell, -1)

    def test_units(self):
        well = harmonic(omega=2.0, mass=3.0, hbar=0.5)
        assert solve_level(well, 7).energy == pytest.approx(7.5 * 0.5 * 2.0, rel=1e-12)
        assert solve_level(well, 7).period == pytest.approx(math.pi, rel=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(0, 60))
    def test_property_residual_and_action(self, n):
        well = quartic()
        lv = solve_level(well, n)
        assert abs(orbit_action(well, lv.energy) - (2 * n + 1) * math.pi / 2) < 1e-9
        assert lv.turning_left < well.minimum[0] < lv.turning_right


class TestWellConstruction:
    def test_double_well_rejected(self):
        with pytest.raises(WellError):
            PotentialWell(lambda x: (np.asarray(x) ** 2 - 1) ** 2, (-2.0, 2.0))

    def test_empty_domain(self):
        with pytest.raises(WellError):
            PotentialWell(lambda x: np.asarray(x) ** 2, (1.0, -1.0))

    def test_finite_difference_derivative(self):
        well = PotentialWell(lambda x: np.cosh(np.asarray(x)), (-3.0, 3.0))
        assert well.force_gradient(1.0) == pytest.approx(math.sinh(1.0), rel=1e-8)

    def test_tabulated_matches_analytic(self, tmp_path):
        xs = np.linspace(-8, 8, 801)
        path = tmp_path / "v.csv"
        np.savetxt(path, np.column_stack([xs, 0.5 * xs**2]), delimiter=",", header="x,V", comments="")
        well = read_potential_csv(path)
        assert solve_level(well, 10).energy == pytest.approx(10.5, rel=1e-6)

    def test_tabulated_rejects_unsorted(self):
        with pytest.raises(WellError):
            tabulated([0, 2, 1, 3], [1, 0, 0, 1])

    def test_airy_length(self, hwell):
        a = turning_points(hwell, 50.5)[1]
        assert airy_length(hwell, a) == pytest.approx((1 / (2 * a)) ** (1 / 3), rel=1e-12)
