"""
Unit tests for the potential's Fourier data and norms.
"""

import math

import numpy as np
import pytest
import sympy as sp

from toruscascade.errors import LatticeOverflowError, ResolutionError
from toruscascade.lattice import LatticeVec
from toruscascade.potential import (
    PHASE_PRODUCT_LIMIT,
    PotentialSpec,
    V_realspace,
    V_sobolev_norm,
    fourier_coefficient_derivative,
    log_plateau_norm,
    plateau_sup,
    potential_norm_series,
    realness_residue,
    reduce_phase,
    v_coeff,
)

# Inside the first plateau of the default schedule (ramp [0, 1], plateau [1, 10])
PLATEAU_T = 5.5


@pytest.fixture(scope="module")
def spec(family, schedule):
    return PotentialSpec(family, schedule)


class TestReducePhase:
    """Test argument reduction of large phases."""

    def test_small_unchanged(self):
        np.testing.assert_array_equal(reduce_phase(np.array([3.0, -7.0]), 2.0), [6.0, -14.0])

    def test_large_reduced(self):
        omega, t = 123456789.0, 1234.5
        reduced = float(reduce_phase(omega, t))
        assert abs(reduced) <= 2 * math.pi + 1e-6
        assert math.sin(reduced) == pytest.approx(math.sin(omega * t), abs=1e-6)

    def test_near_limit_matches_exact_reduction(self):
        """A rounded omega * floor(t) would be off by about 1e-2 here."""
        omega, t = 2 ** 36 + 12345, 1000.375
        reduced = float(reduce_phase(np.array([float(omega)]), t)[0])
        exact = float(sp.Mod(sp.Integer(omega) * sp.Rational(t), 2 * sp.pi).evalf(40))
        gap = (reduced - exact) % (2 * math.pi)
        assert min(gap, 2 * math.pi - gap) <= 1e-4

    def test_beyond_limit_raises(self):
        with pytest.raises(LatticeOverflowError, match="exact reduction"):
            reduce_phase(np.array([2.0 ** 40]), 2.0 ** 8 + 0.5)
        assert 2.0 ** 40 * (2 ** 8 + 1) >= PHASE_PRODUCT_LIMIT


class TestCoefficients:
    """Test v_n(t) and the Fourier coefficient of V."""

    def test_v_coeff_support(self, spec, family, schedule):
        amp = schedule.segments[1].amplitude
        assert v_coeff(spec, family.l[0], PLATEAU_T) == pytest.approx(amp)
        assert v_coeff(spec, -family.l[0], PLATEAU_T) == pytest.approx(amp)
        assert v_coeff(spec, family.l[1], PLATEAU_T) == 0.0
        assert v_coeff(spec, LatticeVec(0, 0), PLATEAU_T) == 0.0

    def test_v_coeff_outside(self, spec, family, schedule):
        assert v_coeff(spec, family.l[0], schedule.horizon + 1.0) == 0.0

    def test_coefficient_value(self, spec, family, schedule):
        """-2 r sin(|l|^2 t) on the plateau."""
        amp = schedule.segments[1].amplitude
        lk, coeff = fourier_coefficient_derivative(spec, PLATEAU_T, 0)
        assert lk == family.l[0]
        assert coeff == pytest.approx(-2 * amp * math.sin(4 * PLATEAU_T))

    def test_time_derivative(self, spec, schedule):
        """On a plateau d/dt of -2 r sin(4 t) is -8 r cos(4 t)."""
        amp = schedule.segments[1].amplitude
        _, d1 = fourier_coefficient_derivative(spec, PLATEAU_T, 1)
        assert d1 == pytest.approx(-8 * amp * math.cos(4 * PLATEAU_T))

    def test_derivative_on_ramp(self, spec):
        """Leibniz formula agrees with a central difference on the first ramp."""
        t, h = 0.4, 1e-6
        _, plus = fourier_coefficient_derivative(spec, t + h, 0)
        _, minus = fourier_coefficient_derivative(spec, t - h, 0)
        _, exact = fourier_coefficient_derivative(spec, t, 1)
        assert exact == pytest.approx((plus - minus) / (2 * h), rel=1e-6)

    def test_no_active_drive(self, spec, schedule):
        assert fourier_coefficient_derivative(spec, schedule.horizon + 2.0, 1) == (None, 0.0)


class TestRealSpace:
    """Test real-space samples of V."""

    def test_matches_cosine(self, spec, family, schedule):
        """V = -4 r sin(|l|^2 t) cos(l . x) on the grid."""
        N = 64
        amp = schedule.segments[1].amplitude
        x = 2 * np.pi * np.arange(N) / N
        X, Y = np.meshgrid(x, x, indexing="ij")
        lk = family.l[0]
        expected = -4 * amp * math.sin(4 * PLATEAU_T) * np.cos(lk.x * X + lk.y * Y)
        np.testing.assert_allclose(V_realspace(spec, PLATEAU_T, N), expected, atol=1e-12)

    def test_mean_zero(self, spec):
        assert abs(float(np.mean(V_realspace(spec, PLATEAU_T, 32)))) <= 1e-14

    def test_real(self, spec):
        assert realness_residue(spec, PLATEAU_T, 256) <= 1e-12

    def test_resolution(self, spec):
        with pytest.raises(ResolutionError, match="resolve"):
            V_realspace(spec, PLATEAU_T, 4)

    def test_zero_outside_schedule(self, spec, schedule):
        assert np.all(V_realspace(spec, schedule.horizon + 1.0, 8) == 0.0)


class TestSobolevNorm:
    """Test ||d_t^m V||_{H^s}."""

    def test_l2_matches_parseval(self, spec):
        """For s = 0 the norm is the L^2 norm on [0, 2 pi)^2."""
        values = V_realspace(spec, PLATEAU_T, 64)
        l2 = math.sqrt((2 * math.pi) ** 2 * float(np.mean(values ** 2)))
        assert V_sobolev_norm(spec, PLATEAU_T, 0.0) == pytest.approx(l2, rel=1e-10)

    def test_weight(self, spec, family):
        """H^s adds the factor |l|^s."""
        ratio = V_sobolev_norm(spec, PLATEAU_T, 2.0) / V_sobolev_norm(spec, PLATEAU_T, 0.0)
        assert ratio == pytest.approx(family.l[0].norm() ** 2)

    def test_plateau_sup_bounds(self, spec, schedule):
        """The plateau supremum dominates every sample of drive 0."""
        bound = plateau_sup(spec, 0, 1.0, 1)
        for t in np.linspace(0.0, schedule.segments[2].t_end, 200):
            assert V_sobolev_norm(spec, float(t), 1.0, 1) <= bound * (1 + 1e-12)

    def test_plateau_sup_unlit_drive(self, spec, family):
        assert plateau_sup(spec, family.K, 1.0, 0) == 0.0

    def test_series_frame(self, spec):
        frame = potential_norm_series(spec, [0.0, PLATEAU_T, 1000.0], [(1.0, 0), (2.0, 1)])
        assert list(frame.columns) == ["t", "k", "hs_s1_m0", "hs_s2_m1"]
        assert frame["k"].tolist() == [0, 0, -1]
        assert frame.loc[2, "hs_s1_m0"] == 0.0


class TestLogPlateauNorm:
    """Test the paper-mode plateau norms in log-space."""

    def test_decreasing_past_two(self, family):
        for s, m in [(0, 0), (1, 0), (4, 3), (10, 0)]:
            values = [log_plateau_norm(family, k, s, m) for k in range(2, family.K + 1)]
            assert all(b < a for a, b in zip(values, values[1:]))

    def test_matches_direct_value(self, family):
        """Agrees with plateau_sup for the representable first drive."""
        from toruscascade.schedule import BetaMode, build_schedule

        paper = build_schedule(family, 1, BetaMode("paper"))
        spec = PotentialSpec(family, paper)
        direct = plateau_sup(spec, 0, 1.0, 0)
        assert log_plateau_norm(family, 0, 1.0, 0) == pytest.approx(math.log(direct), rel=1e-12)
