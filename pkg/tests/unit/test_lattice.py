"""
Unit tests for lattice geometry and the frequency family.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toruscascade.errors import LatticeOverflowError, ReductionMismatchError
from toruscascade.lattice import (
    ChainNode,
    FrequencyFamily,
    LatticeVec,
    certification_passed,
    chain_nodes,
    chain_pattern,
    construct_family,
    family_from_dict,
    family_from_json,
    growth_constants,
    omega_minus,
    omega_plus,
    reduced_interactions,
    resonant_minus,
    resonant_plus,
    rotate90,
    verify_properties,
)

small_ints = st.integers(min_value=-50, max_value=50)
vectors = st.builds(LatticeVec, small_ints, small_ints)

BOX_RADIUS = 20
BOX = [LatticeVec(x, y) for x in range(-BOX_RADIUS, BOX_RADIUS + 1) for y in range(-BOX_RADIUS, BOX_RADIUS + 1)]


class TestLatticeVec:
    """Test integer vector arithmetic."""

    def test_arithmetic(self):
        """Test addition, subtraction and negation."""
        a, b = LatticeVec(1, 2), LatticeVec(-3, 5)
        assert a + b == LatticeVec(-2, 7)
        assert a - b == LatticeVec(4, -3)
        assert -a == LatticeVec(-1, -2)
        assert a.scale(3) == LatticeVec(3, 6)

    def test_dot_and_norm(self):
        """Test exact inner products."""
        v = LatticeVec(3, 4)
        assert v.norm2() == 25
        assert v.norm() == 5.0
        assert v.dot(LatticeVec(4, -3)) == 0

    def test_out_of_range_component(self):
        """Components beyond the 128-bit range are rejected."""
        with pytest.raises(LatticeOverflowError):
            LatticeVec(2 ** 127, 0)

    def test_overflowing_dot(self):
        """A product leaving the range raises instead of wrapping."""
        big = LatticeVec(2 ** 100, 0)
        with pytest.raises(LatticeOverflowError):
            big.dot(big)


class TestRotation:
    """Test the quarter turn."""

    def test_rotate_unit(self):
        assert rotate90(LatticeVec(1, 0)) == LatticeVec(0, 1)
        assert rotate90(LatticeVec(0, 1)) == LatticeVec(-1, 0)

    @given(vectors)
    def test_four_turns_identity(self, v):
        """Four quarter turns return the input."""
        assert rotate90(rotate90(rotate90(rotate90(v)))) == v

    @given(vectors)
    def test_orthogonal_same_length(self, v):
        w = rotate90(v)
        assert v.dot(w) == 0
        assert w.norm2() == v.norm2()


class TestResonance:
    """Test the resonance tests against the phases."""

    @given(vectors, vectors)
    def test_plus_matches_phase(self, n, m):
        """m is + resonant for n exactly when omega+ vanishes."""
        assert resonant_plus(n, m) == (omega_plus(m, n) == 0)

    @given(vectors, vectors)
    def test_minus_matches_phase(self, n, m):
        """m is - resonant for n exactly when omega- vanishes."""
        assert resonant_minus(n, m) == (omega_minus(m, n) == 0)

    def test_duality_on_box(self):
        """resonant_plus(n, m) iff resonant_minus(m, n) for every pair with |x|, |y| <= 20."""
        mismatches = [(n, m) for n in BOX for m in BOX if resonant_plus(n, m) != resonant_minus(m, n)]
        assert mismatches == []

    def test_dot_test_matches_phase_on_box(self):
        """Every pair with |x|, |y| <= 20, against omega+ and an independent numpy phase."""
        xs = np.array([v.x for v in BOX])
        ys = np.array([v.y for v in BOX])
        nx, ny = xs[:, None], ys[:, None]
        mx, my = xs[None, :], ys[None, :]
        phase = mx ** 2 + my ** 2 + (mx - nx) ** 2 + (my - ny) ** 2 - nx ** 2 - ny ** 2
        dot = np.array([[resonant_plus(n, m) for m in BOX] for n in BOX])
        np.testing.assert_array_equal(dot, phase == 0)
        mismatches = [(n, m) for n in BOX for m in BOX if resonant_plus(n, m) != (omega_plus(m, n) == 0)]
        assert mismatches == []
        # m = 0 and m = n always resonate; other points on the circle over [0, n] add more
        assert dot.sum() > 2 * len(BOX)

    def test_rotated_step_is_plus_resonant(self):
        """Stepping from m along its own rotation keeps m orthogonal to the step."""
        m = LatticeVec(2, 1)
        n = m + rotate90(m).scale(3)
        assert resonant_plus(n, m)
        assert not resonant_minus(n, m)


class TestConstructFamily:
    """Test the inductive construction."""

    def test_default_family_shape(self, family):
        """K = 10 gives eleven steps and twelve p-nodes."""
        assert family.K == 10
        assert len(family.m) == 11
        assert len(family.l) == 11
        assert len(family.p_nodes()) == 12
        assert len(family.s_nodes()) == 11

    def test_first_multiplier(self, family):
        """The first step uses the smallest admissible multiplier."""
        assert family.a_choices[0] == 2
        assert family.l[0] == LatticeVec(0, 2)

    def test_multipliers_grow(self, family):
        """a_n >= max(2, n + 1) and l_n is a multiple of the rotated m_n."""
        for n, a in enumerate(family.a_choices):
            assert a >= max(2, n + 1)
            assert family.l[n] == rotate90(family.m[n]).scale(a)

    def test_recursion(self, family):
        """m_{k+1} = m_k + l_k with l_k orthogonal to m_k."""
        for k in range(family.K):
            assert family.m[k + 1] == family.m[k] + family.l[k]
            assert family.m[k].dot(family.l[k]) == 0

    def test_certification_passes(self, family):
        """All ten properties hold."""
        report = verify_properties(family)
        assert certification_passed(report)
        assert all(entry["witness"] is None for entry in report.values())

    def test_lengths_separate(self, family):
        """|l_{k+1}| > |l_k| + 1."""
        for k in range(family.K):
            assert family.l[k + 1].norm() > family.l[k].norm() + 1

    def test_deterministic(self):
        """Two constructions give identical documents."""
        a = construct_family(LatticeVec(1, 0), 6)
        b = construct_family(LatticeVec(1, 0), 6)
        assert a.to_json() == b.to_json()

    def test_other_start(self):
        """A different start frequency also certifies."""
        f = construct_family(LatticeVec(2, 1), 5)
        assert certification_passed(verify_properties(f))

    def test_zero_start(self):
        with pytest.raises(ValueError, match="non-zero"):
            construct_family(LatticeVec(0, 0), 3)

    def test_negative_K(self):
        with pytest.raises(ValueError):
            construct_family(LatticeVec(1, 0), -1)

    def test_overflow_reports_index(self):
        """Long families leave the 128-bit range and say where."""
        with pytest.raises(LatticeOverflowError, match="index"):
            construct_family(LatticeVec(1, 0), 30)


class TestVerifyProperties:
    """Test certification of broken families."""

    def test_orthogonality_violation(self, family):
        """Tilting one step breaks its orthogonality to m_k."""
        l = list(family.l)
        l[2] = l[2] + LatticeVec(1, 0)
        broken = FrequencyFamily(m=list(family.m), l=l)
        report = verify_properties(broken)
        assert report["P2"]["passed"] is False
        assert report["P2"]["witness"] is not None
        assert not certification_passed(report)

    def test_length_mismatch(self, family):
        """Unequal m and l lists fail the recursion property."""
        broken = FrequencyFamily(m=list(family.m[:-1]), l=list(family.l))
        report = verify_properties(broken)
        assert report["P3"]["passed"] is False


class TestFamilyDocument:
    """Test the JSON form of a family."""

    def test_roundtrip(self, family):
        restored = family_from_json(family.to_json())
        assert restored.m == family.m
        assert restored.l == family.l
        assert restored.a_choices == family.a_choices

    def test_rejects_broken_recursion(self, family):
        data = family.to_dict()
        data["m"][3] = [0, 0]
        with pytest.raises(ValueError, match="m\\[3\\]"):
            family_from_dict(data)

    def test_rejects_missing_key(self):
        with pytest.raises(ValueError, match="Malformed"):
            family_from_dict({"m": [[1, 0]]})

    def test_rejects_wrong_K(self, family):
        data = family.to_dict()
        data["K"] = 3
        with pytest.raises(ValueError, match="K=3"):
            family_from_dict(data)


class TestReduction:
    """Test the brute-force reduction to the chain pattern."""

    def test_chain_nodes_distinct(self, family):
        nodes = chain_nodes(family)
        assert len(nodes) == 2 * family.K + 3
        assert len(set(nodes.values())) == len(nodes)

    def test_matches_pattern(self, family):
        table = reduced_interactions(family)
        pattern = chain_pattern(family)
        for label, terms in pattern.items():
            assert set(table[label]) == set(terms)

    def test_pattern_shape(self, family):
        """The end p-nodes have one fewer interaction; s-nodes have one."""
        pattern = chain_pattern(family)
        assert len(pattern[ChainNode("p", 0)]) == 2
        assert len(pattern[ChainNode("p", 1)]) == 3
        assert len(pattern[ChainNode("p", family.K + 1)]) == 1
        assert len(pattern[ChainNode("s", 4)]) == 1

    def test_coinciding_nodes(self):
        """A degenerate family whose chain nodes collide is rejected."""
        m0, l0 = LatticeVec(1, 0), LatticeVec(0, 0)
        f = FrequencyFamily(m=[m0], l=[l0])
        with pytest.raises(ReductionMismatchError):
            chain_nodes(f)


class TestGrowthConstants:
    """Test the fitted factorial growth constants."""

    def test_bounds_hold(self, family):
        c = growth_constants(family)
        for n, node in enumerate(family.p_nodes()[1:], start=1):
            size = node.norm()
            assert c["c_m"] * math.factorial(n - 1) <= size * (1 + 1e-12)
            assert size <= c["C_m"] ** n * math.factorial(n - 1) * (1 + 1e-12)

    def test_ratio(self, family):
        """n |m_n| <= |l_n| <= C n |m_n| with C >= 1."""
        c = growth_constants(family)
        assert c["C_ratio"] >= 1.0
        for n in range(1, family.K + 1):
            ratio = family.l[n].norm() / family.m[n].norm()
            assert n <= ratio <= c["C_ratio"] * n * (1 + 1e-12)
