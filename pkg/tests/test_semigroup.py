"""Generators, transition kernels, resolvents, and averaged measures."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ergocert.core import Kernel, Measure, StateSpace, power, push
from ergocert.semigroup import (
    Generator,
    auxiliary_measure,
    discrete_resolvent,
    kb_measure,
    occupation_density,
    resolvent,
    resolvent_raw,
    transition_at,
    uniformized,
)
from ergocert.solver import solve_continuous

S2 = StateSpace.range(2)
SYM = Generator(S2, [[-1.0, 1.0], [1.0, -1.0]])


def random_generator(rng, n):
    off = rng.random((n, n)) * rng.choice([0.2, 1.0, 3.0])
    np.fill_diagonal(off, 0.0)
    rates = off.copy()
    np.fill_diagonal(rates, -off.sum(axis=1))
    return Generator(StateSpace.range(n), rates)


def random_kernel(rng, n):
    rows = rng.random((n, n)) + 0.05
    rows /= rows.sum(axis=1, keepdims=True)
    return Kernel(StateSpace.range(n), rows)


class TestGeneratorConstruction:
    def test_row_sums_enforced(self):
        with pytest.raises(ValueError, match="sums to"):
            Generator(S2, [[-1.0, 0.5], [1.0, -1.0]])

    def test_negative_off_diagonal_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            Generator(S2, [[1.0, -1.0], [1.0, -1.0]])

    def test_default_uniformization_headroom(self):
        assert_allclose(SYM.lam, 1.05)

    def test_lam_below_diagonal_rejected(self):
        with pytest.raises(ValueError, match="uniformization"):
            Generator(S2, [[-2.0, 2.0], [1.0, -1.0]], lam=1.5)

    def test_uniformized_kernel(self):
        K = uniformized(SYM)
        assert_allclose(K.rows, [[1 - 1 / 1.05, 1 / 1.05],
                                 [1 / 1.05, 1 - 1 / 1.05]], atol=1e-15)


class TestTransitionAt:
    def test_symmetric_closed_form(self):
        # e^{tQ} for the rate-1 swap pair relaxes at rate e^{-2t}
        for t in (0.1, 0.7, 2.5, 13.0):
            e = np.exp(-2.0 * t)
            want = np.array([[(1 + e) / 2, (1 - e) / 2],
                             [(1 - e) / 2, (1 + e) / 2]])
            assert_allclose(transition_at(SYM, t).rows, want, atol=1e-12)

    def test_semigroup_property(self):
        P1 = transition_at(SYM, 0.4).rows
        P2 = transition_at(SYM, 0.8).rows
        assert_allclose(P1 @ P1, P2, atol=1e-12)

    def test_time_zero_is_identity(self):
        assert_allclose(transition_at(SYM, 0.0).rows, np.eye(2))

    def test_long_time_squaring_branch(self):
        # lam * t far beyond the direct series limit
        rows = transition_at(SYM, 500.0).rows
        assert_allclose(rows, np.full((2, 2), 0.5), atol=1e-12)

    def test_discrete_integer_times(self):
        K = Kernel(S2, [[0.9, 0.1], [0.2, 0.8]])
        assert_allclose(transition_at(K, 3).rows, power(K, 3).rows)
        with pytest.raises(ValueError, match="integer"):
            transition_at(K, 0.5)


class TestResolventAlgebra:
    def test_symmetric_closed_form(self):
        # (alpha I - Q)^{-1} scaled to markovian: rows ((a+1)/(a+2), 1/(a+2))
        for a in (0.5, 1.0, 2.0):
            R = resolvent(SYM, a)
            assert_allclose(R.rows, [[(a + 1) / (a + 2), 1 / (a + 2)],
                                     [1 / (a + 2), (a + 1) / (a + 2)]],
                            atol=1e-14)

    def test_resolvent_identity_random(self):
        # R_a - R_b = (b - a) R_a R_b on twenty random generators
        rng = np.random.default_rng(11)
        for _ in range(20):
            G = random_generator(rng, int(rng.integers(2, 9)))
            a, b = sorted(rng.uniform(0.2, 5.0, size=2))
            Ra = resolvent_raw(G, a)
            Rb = resolvent_raw(G, b)
            lhs = Ra - Rb
            rhs = (b - a) * Ra @ Rb
            assert np.abs(lhs - rhs).max() <= 1e-9

    def test_raw_resolvent_mass(self):
        raw = resolvent_raw(SYM, 2.0)
        assert_allclose(raw.sum(axis=1), [0.5, 0.5], atol=1e-14)

    def test_discrete_closed_form_vs_series(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            K = random_kernel(rng, int(rng.integers(2, 9)))
            R = discrete_resolvent(K)
            term = np.eye(K.size)
            acc = np.zeros_like(term)
            for k in range(200):
                acc += 0.5 ** (k + 1) * term
                term = term @ K.rows
            assert np.abs(R.rows - acc).max() <= 1e-10

    def test_alpha_positive_required(self):
        with pytest.raises(ValueError, match="positive"):
            resolvent_raw(SYM, 0.0)

    def test_raw_rejects_kernels(self):
        K = Kernel(S2, [[0.9, 0.1], [0.2, 0.8]])
        with pytest.raises(ValueError, match="discrete_resolvent"):
            resolvent_raw(K, 1.0)


class TestInvarianceTransfer:
    """Fixed points transfer between the flow and its resolvents."""

    def test_invariant_measure_fixed_by_resolvent(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            G = random_generator(rng, int(rng.integers(2, 8)))
            results = solve_continuous(G)
            m = results[0].nu
            a = float(rng.uniform(0.3, 4.0))
            fixed = m.weights @ resolvent(G, a).rows
            assert np.abs(fixed - m.weights).sum() <= 1e-10

    def test_resolvent_fixed_point_is_invariant_for_all_times(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            G = random_generator(rng, int(rng.integers(2, 8)))
            a = float(rng.uniform(0.3, 4.0))
            R = resolvent(G, a).rows
            # left fixed vector of the resolvent kernel
            w, vl = np.linalg.eig(R.T)
            k = int(np.argmin(np.abs(w - 1.0)))
            v = np.real(vl[:, k])
            v = np.abs(v) / np.abs(v).sum()
            for t in (0.3, 1.0, 4.7):
                moved = v @ transition_at(G, t).rows
                assert np.abs(moved - v).sum() <= 1e-8

    def test_periodic_average_is_invariant(self):
        # delta_0 returns after two steps of the swap kernel; its two-step
        # average is invariant for the kernel itself
        swap = Kernel(S2, [[0.0, 1.0], [1.0, 0.0]])
        m = Measure(S2, [1.0, 0.0])
        assert_allclose(push(m, power(swap, 2)).weights, m.weights)
        avg = kb_measure(swap, m, 2)
        assert_allclose(avg.weights, [0.5, 0.5])
        assert_allclose(push(avg, swap).weights, avg.weights)


class TestAuxiliaryMeasure:
    def test_absorbing_pair_from_corner(self):
        P = Kernel(S2, [[0.0, 1.0], [0.0, 1.0]])
        m = auxiliary_measure(P, Measure(S2, [1.0, 0.0]))
        assert_allclose(m.weights, [0.5, 0.5], atol=1e-15)

    def test_discrete_mass_preserved(self):
        rng = np.random.default_rng(15)
        K = random_kernel(rng, 6)
        mu = Measure(K.space, rng.random(6))
        m = auxiliary_measure(K, mu)
        assert_allclose(m.mass, mu.mass, rtol=1e-12)

    def test_continuous_invariant_start_is_fixed(self):
        # an invariant probability composed with the raw resolvent at
        # alpha = 1 returns itself
        mu = Measure(S2, [0.5, 0.5])
        m = auxiliary_measure(SYM, mu, alpha=1.0)
        assert_allclose(m.weights, mu.weights, atol=1e-14)

    def test_continuous_mass_scaling(self):
        mu = Measure(S2, [0.3, 0.7])
        m = auxiliary_measure(SYM, mu, alpha=2.0)
        assert_allclose(m.mass, 0.5, rtol=1e-12)

    def test_full_support_after_smoothing(self):
        P = Kernel(S2, [[0.5, 0.5], [0.5, 0.5]])
        m = auxiliary_measure(P, Measure(S2, [1.0, 0.0]))
        assert (m.weights > 0).all()


class TestAveragedMeasures:
    def test_discrete_kb_frozen(self):
        K = Kernel(S2, [[0.9, 0.1], [0.2, 0.8]])
        avg = kb_measure(K, Measure(S2, [1.0, 0.0]), 2)
        assert_allclose(avg.weights, [0.95, 0.05], atol=1e-15)

    def test_discrete_kb_needs_integer(self):
        K = Kernel(S2, [[0.9, 0.1], [0.2, 0.8]])
        with pytest.raises(ValueError, match="integer"):
            kb_measure(K, Measure(S2, [1.0, 0.0]), 1.5)

    def test_continuous_kb_closed_form(self):
        # (1/t) integral of delta_0 P_s: deviation (1 - e^{-2t}) / (4t)
        mu = Measure(S2, [1.0, 0.0])
        for t in (0.5, 1.0, 3.0):
            avg = kb_measure(SYM, mu, t)
            dev = (1.0 - np.exp(-2.0 * t)) / (4.0 * t)
            assert_allclose(avg.weights, [0.5 + dev, 0.5 - dev], atol=1e-9)

    def test_occupation_density_invariant_start(self):
        m = Measure(S2, [0.5, 0.5])
        f = occupation_density(SYM, m, 3.0)
        assert_allclose(f.values, [3.0, 3.0], atol=1e-9)

    def test_occupation_density_rejects_kernels(self):
        K = Kernel(S2, [[0.9, 0.1], [0.2, 0.8]])
        with pytest.raises(ValueError, match="continuous"):
            occupation_density(K, Measure(S2, [0.5, 0.5]), 1.0)
