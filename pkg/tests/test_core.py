"""Kernel algebra: frozen examples and structural invariants."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from ergocert.core import (
    AbsoluteContinuityError,
    Kernel,
    Measure,
    SpaceMismatchError,
    StateFn,
    StateSet,
    StateSpace,
    adjoint,
    apply,
    cesaro,
    identity,
    matmul,
    power,
    push,
)

S2 = StateSpace.range(2)


def kernel2(rows, **kw):
    return Kernel(S2, rows, **kw)


class TestConstruction:
    def test_markovian_rowsum_reject(self):
        with pytest.raises(ValueError, match="sums to"):
            kernel2([[0.9, 0.2], [0.2, 0.8]])

    def test_markovian_rowsum_renormalize(self):
        K = kernel2([[0.9, 0.3], [0.2, 0.8]], on_rowsum="renormalize")
        assert_allclose(K.rows.sum(axis=1), [1.0, 1.0], atol=1e-15)

    def test_negative_entry_rejected(self):
        with pytest.raises(ValueError, match="negative"):
            kernel2([[1.1, -0.1], [0.2, 0.8]])

    def test_tiny_negative_clipped(self):
        K = kernel2([[1.0 + 1e-13, -1e-13], [0.2, 0.8]])
        assert K.rows[0, 1] == 0.0

    def test_sub_markovian_allows_deficit(self):
        K = kernel2([[0.5, 0.2], [0.0, 0.0]], kind="sub-markovian")
        assert K.kind == "sub-markovian"

    def test_sub_markovian_excess_rejected(self):
        with pytest.raises(ValueError, match="> 1"):
            kernel2([[0.9, 0.2], [0.2, 0.8]], kind="sub-markovian")

    def test_rows_are_frozen(self):
        K = kernel2([[0.9, 0.1], [0.2, 0.8]])
        with pytest.raises(ValueError):
            K.rows[0, 0] = 0.5

    def test_measure_negative_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            Measure(S2, [0.5, -0.5])

    def test_statefn_nan_rejected(self):
        with pytest.raises(ValueError, match="NaN"):
            StateFn(S2, [0.0, np.nan])

    def test_statefn_inf_needs_flag(self):
        with pytest.raises(ValueError, match="extended"):
            StateFn(S2, [0.0, np.inf])
        f = StateFn(S2, [0.0, np.inf], extended=True)
        assert f.extended


class TestOperations:
    K = kernel2([[0.9, 0.1], [0.2, 0.8]])

    def test_apply_frozen_example(self):
        f = StateFn(S2, [0.0, 1.0])
        assert_allclose(apply(self.K, f).values, [0.1, 0.8], atol=1e-15)

    def test_push_frozen_example(self):
        m = Measure(S2, [0.5, 0.5])
        assert_allclose(push(m, self.K).weights, [0.55, 0.45], atol=1e-15)

    def test_power_two_by_hand(self):
        # row 0: (0.81 + 0.02, 0.09 + 0.08), row 1: (0.18 + 0.16, 0.02 + 0.64)
        assert_allclose(power(self.K, 2).rows,
                        [[0.83, 0.17], [0.34, 0.66]], atol=1e-15)

    def test_power_zero_is_identity(self):
        assert_allclose(power(self.K, 0).rows, np.eye(2), atol=0)

    def test_power_matches_repeated_matmul(self):
        direct = self.K
        for _ in range(6):
            direct = matmul(direct, self.K)
        assert_allclose(power(self.K, 7).rows, direct.rows, atol=1e-14)

    def test_cesaro_absorbing_example(self):
        K = kernel2([[0.0, 1.0], [0.0, 1.0]])
        S4 = cesaro(K, 4)
        assert_allclose(S4.rows, [[0.25, 0.75], [0.0, 1.0]], atol=1e-15)

    def test_cesaro_matches_direct_sum(self):
        rng = np.random.default_rng(7)
        raw = rng.random((5, 5))
        K = Kernel(StateSpace.range(5), raw / raw.sum(1, keepdims=True),
                   on_rowsum="renormalize")
        for n in (1, 2, 3, 9, 37):
            acc = np.zeros((5, 5))
            pk = np.eye(5)
            for _ in range(n):
                acc += pk
                pk = pk @ K.rows
            assert_allclose(cesaro(K, n).rows, acc / n, atol=1e-13)

    def test_apply_extended_inf_convention(self):
        # no mass on the infinite atom: result stays finite
        K = kernel2([[1.0, 0.0], [0.5, 0.5]])
        V = StateFn(S2, [2.0, np.inf], extended=True)
        out = apply(K, V)
        assert out.values[0] == 2.0
        assert np.isinf(out.values[1])

    def test_space_mismatch(self):
        other = Measure(StateSpace.range(3), [1, 0, 0])
        with pytest.raises(SpaceMismatchError):
            push(other, self.K)


class TestAdjoint:
    def test_invariant_measure_example(self):
        K = kernel2([[0.5, 0.5], [1.0, 0.0]])
        m = Measure(S2, [2 / 3, 1 / 3])
        A = adjoint(K, m)
        assert_allclose(A.rows, [[0.5, 0.5], [1.0, 0.0]], atol=1e-15)

    def test_support_violation_names_atom(self):
        K = kernel2([[0.0, 1.0], [0.0, 1.0]])
        m = Measure(S2, [1.0, 0.0])
        with pytest.raises(AbsoluteContinuityError, match="s1"):
            adjoint(K, m)

    def test_off_support_rows_zero(self):
        K = kernel2([[1.0, 0.0], [1.0, 0.0]])
        m = Measure(S2, [1.0, 0.0])
        A = adjoint(K, m)
        assert_allclose(A.rows[1], [0.0, 0.0], atol=0)

    def test_super_stochastic_row_is_representable(self):
        K = kernel2([[0.0, 1.0], [0.0, 1.0]])
        m = Measure(S2, [0.5, 0.5])
        A = adjoint(K, m)
        assert A.kind == "general"
        assert_allclose(A.rows.sum(axis=1), [0.0, 2.0], atol=1e-15)

    def test_duality_identity(self):
        rng = np.random.default_rng(3)
        n = 6
        sp = StateSpace.range(n)
        raw = rng.random((n, n))
        K = Kernel(sp, raw / raw.sum(1, keepdims=True), on_rowsum="renormalize")
        m = Measure(sp, rng.random(n) + 0.05)
        A = adjoint(K, m)
        f = StateFn(sp, rng.standard_normal(n))
        g = StateFn(sp, rng.standard_normal(n))
        lhs = m.expect(StateFn(sp, f.values * apply(A, g).values))
        rhs = m.expect(StateFn(sp, g.values * apply(K, f).values))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


@st.composite
def markov_pairs(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    rows = draw(st.lists(
        st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=n, max_size=n),
        min_size=n, max_size=n))
    weights = draw(st.lists(st.floats(min_value=0.01, max_value=1.0),
                            min_size=n, max_size=n))
    sp = StateSpace.range(n)
    arr = np.asarray(rows)
    K = Kernel(sp, arr / arr.sum(1, keepdims=True), on_rowsum="renormalize")
    return K, Measure(sp, weights)


class TestProperties:
    @given(markov_pairs(), st.integers(min_value=1, max_value=16))
    @settings(max_examples=60, deadline=None)
    def test_power_preserves_markov_rows(self, pair, n):
        K, _ = pair
        P = power(K, n)
        assert (P.rows >= 0).all()
        assert_allclose(P.rows.sum(axis=1), 1.0, atol=1e-10)

    @given(markov_pairs(), st.integers(min_value=1, max_value=16))
    @settings(max_examples=60, deadline=None)
    def test_cesaro_preserves_markov_rows(self, pair, n):
        K, _ = pair
        S = cesaro(K, n)
        assert (S.rows >= 0).all()
        assert_allclose(S.rows.sum(axis=1), 1.0, atol=1e-10)

    @given(markov_pairs())
    @settings(max_examples=60, deadline=None)
    def test_push_preserves_mass(self, pair):
        K, m = pair
        assert abs(push(m, K).mass - m.mass) <= 1e-12 * max(1.0, m.mass)

    @given(markov_pairs())
    @settings(max_examples=60, deadline=None)
    def test_adjoint_duality(self, pair):
        K, m = pair
        A = adjoint(K, m)
        rng = np.random.default_rng(0)
        f = StateFn(K.space, rng.random(K.size))
        g = StateFn(K.space, rng.random(K.size))
        lhs = m.expect(StateFn(K.space, f.values * apply(A, g).values))
        rhs = m.expect(StateFn(K.space, g.values * apply(K, f).values))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs), abs(rhs))

    @given(markov_pairs())
    @settings(max_examples=40, deadline=None)
    def test_unit_ball_stays_unit_ball(self, pair):
        K, _ = pair
        f = StateFn(K.space, np.linspace(0.0, 1.0, K.size))
        assert apply(K, f).in_unit_interval(tol=1e-12)


def test_stateset_helpers():
    sp = StateSpace.range(4)
    A = StateSet(sp, [2, 0])
    assert A.members == (0, 2)
    assert A.complement().members == (1, 3)
    assert_allclose(A.indicator().values, [1, 0, 1, 0])
    m = Measure(sp, [0.1, 0.2, 0.3, 0.4])
    assert m.of(A) == pytest.approx(0.4)


def test_identity_kernel():
    sp = StateSpace.range(3)
    assert_allclose(identity(sp).rows, np.eye(3))
