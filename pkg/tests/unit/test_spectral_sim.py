"""
Unit tests for the spectral systems.
"""

import numpy as np
import pytest

from toruscascade.chain import ChainState, chain_rhs, initial_state
from toruscascade.lattice import ChainNode, LatticeVec, omega_minus, omega_plus
from toruscascade.potential import PotentialSpec
from toruscascade.schedule import BetaMode, build_schedule
from toruscascade.spectral_sim import (
    RhsKind,
    SpectralProblem,
    SpectralState,
    TruncationSet,
    cauchy_check,
    cauchy_table,
    fs_deviation,
    fs_rhs,
    integrate,
    leakage_rate,
    long_frame,
    pert_residual,
    pert_rhs,
    pert_solution,
    rfs_rhs,
)

EPS = 1.0 / np.sqrt(2.0)

# Times inside the fast schedule: Move1 on r_0 runs over [0, 2.25],
# Move2 on r_1 over [2.25, 5.75] (plateau [3.25, 4.75]), Move3 on r_0 over [5.75, 8]
T_RAMP = 0.5
T_DRIVE1 = 4.0
T_MOVE3 = 7.5


@pytest.fixture(scope="module")
def chain_only(small_family, fast_schedule):
    return SpectralProblem(small_family, fast_schedule, shell_depth=0)


@pytest.fixture(scope="module")
def shell(small_family, fast_schedule):
    return SpectralProblem(small_family, fast_schedule, shell_depth=1)


class TestTruncationSet:
    """Test the finite node set."""

    def test_chain_only(self, small_family):
        trunc = TruncationSet.build(small_family, [0, 1], shell_depth=0)
        assert len(trunc) == 2 * small_family.K + 3
        assert trunc.nodes[0] == small_family.m[0]

    def test_shell_contains_neighbours(self, small_family):
        trunc = TruncationSet.build(small_family, [0, 1], shell_depth=1)
        for v in trunc.chain.values():
            for k in (0, 1):
                assert v + small_family.l[k] in trunc.index
                assert v - small_family.l[k] in trunc.index
        assert len(set(trunc.nodes)) == len(trunc)

    def test_deterministic_order(self, small_family):
        a = TruncationSet.build(small_family, [1, 0], shell_depth=2)
        b = TruncationSet.build(small_family, [0, 1], shell_depth=2)
        assert a.nodes == b.nodes

    def test_pairs_step_by_drive(self, shell, small_family):
        trunc = shell.trunc
        for k in trunc.drives:
            table = trunc.pairs(k)
            assert len(table.target) > 0
            for i, j in zip(table.target, table.source):
                step = trunc.nodes[i] - trunc.nodes[j]
                assert step in (small_family.l[k], -small_family.l[k])

    def test_chain_to_vector(self, chain_only, small_family):
        vec = chain_only.trunc.chain_to_vector(initial_state(small_family.K))
        assert vec[chain_only.trunc.chain_index(ChainNode("p", 0))] == pytest.approx(-EPS)
        assert vec[chain_only.trunc.chain_index(ChainNode("s", 0))] == pytest.approx(0.5)
        assert np.sum(np.abs(vec) ** 2) == pytest.approx(1.0)

    def test_from_coeffs_outside(self, chain_only):
        with pytest.raises(ValueError, match="outside"):
            SpectralState.from_coeffs(chain_only.trunc, {LatticeVec(10 ** 6, 0): 1.0})


class TestRightHandSides:
    """Test the full, resonant and perturbation derivatives."""

    def test_fs_conserves_mass(self, shell):
        """Retained interactions come in anti-Hermitian pairs."""
        rng = np.random.default_rng(0)
        values = rng.normal(size=len(shell.trunc)) + 1j * rng.normal(size=len(shell.trunc))
        values /= np.linalg.norm(values)
        for t in (T_RAMP, T_DRIVE1, T_MOVE3):
            state = SpectralState(shell.trunc, values, t)
            d = fs_rhs(state, shell.spec, shell.trunc)
            assert abs(2 * np.real(np.vdot(values, d))) <= 1e-12

    def test_rfs_reduces_to_chain(self, chain_only, small_family, fast_schedule):
        """On the chain support the resonant system is the chain system."""
        rng = np.random.default_rng(1)
        K = small_family.K
        chain = ChainState(rng.normal(size=K + 2), rng.normal(size=K + 1))
        for t in (T_RAMP, T_DRIVE1, T_MOVE3):
            seg = fast_schedule.segment_at(t)
            r = np.zeros(K + 1)
            r[seg.drive_index] = float(seg.value(t))
            state = SpectralState.from_chain(chain_only.trunc, chain, t)
            got = rfs_rhs(state, chain_only.spec, chain_only.trunc)
            want = chain_only.trunc.chain_to_vector(chain_rhs(chain, r))
            np.testing.assert_allclose(got, want, atol=1e-14)

    def test_single_mode_coupling(self, shell, small_family, fast_schedule):
        """A single mode feeds n = m + l_k with r (e^{-i w+ t} - e^{-i w- t})."""
        m = small_family.m[0] - small_family.l[0]
        n = m + small_family.l[1]
        state = SpectralState.from_coeffs(shell.trunc, {m: 1.0}, T_DRIVE1)
        d = fs_rhs(state, shell.spec, shell.trunc)
        r = float(fast_schedule.segment_at(T_DRIVE1).value(T_DRIVE1))
        wp, wm = omega_plus(m, n), omega_minus(m, n)
        expected = r * (np.exp(-1j * wp * T_DRIVE1) - np.exp(-1j * wm * T_DRIVE1))
        assert d[shell.trunc.index[n]] == pytest.approx(expected, rel=1e-12)

    def test_quiet_outside_schedule(self, shell, fast_schedule):
        t = fast_schedule.horizon + 1.0
        values = np.ones(len(shell.trunc), dtype=complex)
        state = SpectralState(shell.trunc, values, t)
        for rhs in (fs_rhs, rfs_rhs):
            np.testing.assert_array_equal(rhs(state, shell.spec, shell.trunc), 0.0)
        np.testing.assert_array_equal(pert_rhs(state, shell.spec, shell.trunc, shell.resonant), 0.0)
        assert leakage_rate(state, shell.spec, shell.trunc) == 0.0

    def test_pert_forcing(self, shell, small_family, fast_schedule):
        """With c = 0 the forcing is the non-resonant part of the chain data."""
        m = small_family.m[0] - small_family.l[0]
        n = m + small_family.l[1]
        zero = SpectralState(shell.trunc, np.zeros(len(shell.trunc), dtype=complex), T_DRIVE1)
        d = pert_rhs(zero, shell.spec, shell.trunc, shell.resonant)
        # s_0 holds 1/sqrt2 while r_1 is lit
        a_m = shell.resonant.state_at(T_DRIVE1).s[0]
        assert a_m == pytest.approx(EPS, abs=1e-12)
        r = float(fast_schedule.segment_at(T_DRIVE1).value(T_DRIVE1))
        wp, wm = omega_plus(m, n), omega_minus(m, n)
        assert wp != 0 and wm != 0
        expected = r * a_m * (np.exp(-1j * wp * T_DRIVE1) - np.exp(-1j * wm * T_DRIVE1))
        assert d[shell.trunc.index[n]] == pytest.approx(expected, rel=1e-12)


class TestIntegration:
    """Test the segment-wise adaptive integration."""

    def test_rfs_matches_exact_chain(self, chain_only, fast_schedule):
        tol = 1e-10
        initial = SpectralState.from_chain(chain_only.trunc, chain_only.resonant.initial, 0.0)
        traj = integrate(chain_only, RhsKind.RFS, initial, fast_schedule.horizon, tol=tol, sample_times=fast_schedule.T)
        exact = chain_only.chain_reference(traj.times)
        assert np.max(np.abs(traj.states - exact)) <= 10 * tol
        assert np.max(np.abs(traj.mass() - 1.0)) <= 1e-9

    def test_rfs_leakage_zero_on_chain(self, chain_only, fast_schedule):
        """Resonant mass never leaves the chain support."""
        initial = SpectralState.from_chain(chain_only.trunc, chain_only.resonant.initial, 0.0)
        times = np.linspace(0.0, fast_schedule.horizon, 33)
        traj = chain_only.integrate(RhsKind.RFS, initial, fast_schedule.horizon, tol=1e-10, sample_times=times)
        assert len(traj.leakage) == 33
        assert traj.leakage_summary()["max_rate"] <= 1e-12

    def test_previous_boundary(self, chain_only):
        assert isinstance(chain_only.spec, PotentialSpec)
        assert chain_only.previous_boundary(1.1) == pytest.approx(1.0)
        assert chain_only.previous_boundary(0.0) == 0.0

    def test_fs_keeps_mass(self, shell, fast_schedule):
        traj, frame = fs_deviation(shell, tol=1e-8, sample_times=np.linspace(0.0, fast_schedule.horizon, 9))
        assert list(frame.columns) == ["t", "deviation_l1", "mass", "leakage"]
        assert frame["deviation_l1"].iloc[0] == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(frame["mass"], 1.0, atol=1e-6)

    def test_sample_times_checked(self, chain_only):
        initial = SpectralState.from_chain(chain_only.trunc, chain_only.resonant.initial, 0.0)
        with pytest.raises(ValueError, match="Sample times"):
            chain_only.integrate(RhsKind.RFS, initial, 1.0, sample_times=[0.0, 2.0])

    def test_backward_outside_schedule(self, chain_only, fast_schedule):
        """Past the horizon the state is carried unchanged."""
        start = fast_schedule.horizon + 5.0
        values = np.arange(len(chain_only.trunc), dtype=complex)
        state = SpectralState(chain_only.trunc, values, start)
        traj = chain_only.integrate(RhsKind.FS, state, fast_schedule.horizon, sample_times=[fast_schedule.horizon, start])
        np.testing.assert_array_equal(traj.states[0], values)

    def test_frame_layout(self, chain_only):
        nodes = chain_only.trunc.nodes[:3]
        frame = long_frame(nodes, np.array([0.0, 1.0]), np.ones((2, 3), dtype=complex))
        assert list(frame.columns) == ["t", "node_x", "node_y", "re", "im"]
        assert len(frame) == 6
        assert frame["t"].tolist() == [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]


class TestPerturbation:
    """Test the backward perturbation solutions."""

    def test_rejects_bad_N(self, shell):
        with pytest.raises(ValueError, match="outside"):
            pert_solution(shell, 0)
        with pytest.raises(ValueError, match="outside"):
            pert_solution(shell, 2)

    def test_cauchy_table(self):
        values = {1: np.array([1.0, 0.0]), 2: np.array([0.5, 0.5j]), 3: np.array([0.5, 0.25j])}
        table = cauchy_table(values)
        assert list(table.columns) == ["N", "M", "distance_l1", "norm_N_l1"]
        assert len(table) == 6
        row = table[(table["N"] == 2) & (table["M"] == 3)].iloc[0]
        assert row["distance_l1"] == pytest.approx(0.25)
        assert row["norm_N_l1"] == pytest.approx(1.0)

    @pytest.mark.slow
    def test_backward_solution(self, shell, fast_schedule):
        traj = pert_solution(shell, 1, tol=1e-8)
        assert traj.times[0] == 0.0
        assert traj.times[-1] == pytest.approx(fast_schedule.T[1])
        np.testing.assert_array_equal(traj.states[-1], 0.0)
        assert 0.0 < traj.l1()[0] < np.inf

    @pytest.mark.slow
    def test_residual_small(self, shell, fast_schedule):
        """c^N satisfies its integral equation on short windows."""
        frame = pert_residual(shell, 1, [1.2, T_DRIVE1, 6.5], tol=1e-8)
        assert list(frame.columns) == ["t", "window", "residual"]
        assert (frame["window"] <= 0.05 + 1e-12).all()
        assert frame["residual"].max() <= 1e-6

    @pytest.mark.slow
    def test_cauchy_check(self, small_family):
        """|c^(N+1)(0) - c^N(0)|_1 shrinks as N grows: the c^N converge."""
        schedule = build_schedule(small_family, 3, BetaMode("scaled", 0.4, 0.5))
        problem = SpectralProblem(small_family, schedule, shell_depth=1)
        table = cauchy_check(problem, [1, 2, 3], 0.0)
        assert len(table) == 6
        same = table[table["N"] == table["M"]]
        np.testing.assert_allclose(same["distance_l1"], 0.0)
        consecutive = [
            float(table[(table["N"] == N) & (table["M"] == N + 1)]["distance_l1"].iloc[0]) for N in (1, 2)
        ]
        assert consecutive[0] > 0.0
        assert consecutive[1] < consecutive[0]


@pytest.mark.slow
class TestFullSystemDeviation:
    """Test that the full system tracks the resonant one for small amplitudes."""

    def test_deviation_small_and_shrinking(self, family):
        maxima = []
        for base in (0.01, 0.005):
            schedule = build_schedule(family, 1, BetaMode("scaled", base, 0.5))
            problem = SpectralProblem(family, schedule, shell_depth=2)
            _, frame = fs_deviation(problem, tol=1e-8)
            maxima.append(frame["deviation_l1"].max())
        assert maxima[0] <= 0.1
        assert maxima[1] < maxima[0]

    def test_two_cycles_at_base_005(self, family):
        """Over two cycles at base 0.05 the deviation exceeds 0.1 but still halves with beta."""
        maxima = []
        for base in (0.05, 0.025):
            schedule = build_schedule(family, 2, BetaMode("scaled", base, 0.5))
            problem = SpectralProblem(family, schedule, shell_depth=2)
            _, frame = fs_deviation(problem, tol=1e-8)
            maxima.append(frame["deviation_l1"].max())
        assert maxima[0] > 0.1
        assert maxima[1] < 0.6 * maxima[0]
