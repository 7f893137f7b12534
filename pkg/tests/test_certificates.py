"""Almost-invariance certificates, index profiles, and modulus classes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from ergocert.core import Kernel, Measure, StateSpace, StateSet
from ergocert.semigroup import Generator
from ergocert.certificates.phi import (
    AlmostInvarianceParams,
    PhiLinear,
    PhiPower,
    PhiTable,
)
from ergocert.certificates.almost import (
    check_absolute_continuity,
    check_almost_invariant,
    check_mean_almost_invariant,
    check_occupation_half,
    check_partial_subinvariance,
    check_resolvent_almost_invariant,
    check_seed_index,
    check_uniform_lp_bound,
    index_profile,
    lp_operator_norm,
    optimal_linear_params,
    profile_certificate,
)

S2 = StateSpace.range(2)
TWO_STATE = Kernel(S2, [[0.9, 0.1], [0.2, 0.8]])
ABSORBING_PAIR = Kernel(S2, [[0.0, 1.0], [0.0, 1.0]])
SYM = Generator(S2, [[-1.0, 1.0], [1.0, -1.0]])
M_INV = Measure(S2, [2 / 3, 1 / 3])
M_UNIFORM = Measure(S2, [0.5, 0.5])
DELTA0 = Measure(S2, [1.0, 0.0])


class TestModulusFamilies:
    def test_linear_inverse_roundtrip(self):
        phi = PhiLinear(2.5)
        assert_allclose(phi.inverse(phi(0.3)), 0.3)
        assert_allclose(phi.scale(2.0)(0.3), 1.5)

    def test_power_inverse_roundtrip(self):
        phi = PhiPower(1.3, mult=0.7, p=3.0)
        assert_allclose(phi.inverse(phi(0.42)), 0.42)

    def test_table_interpolation_and_extension(self):
        phi = PhiTable([0.0, 0.5, 1.0], [0.0, 0.6, 0.9])
        assert_allclose(phi(0.25), 0.3)
        # past the last knot the final slope continues
        assert_allclose(phi(2.0), 0.9 + 0.6)
        assert_allclose(phi.inverse(0.3), 0.25)

    def test_table_rejects_convex_shape(self):
        with pytest.raises(ValueError, match="concave"):
            PhiTable([0.0, 0.5, 1.0], [0.0, 0.1, 0.9])

    def test_table_must_start_at_origin(self):
        with pytest.raises(ValueError, match="start"):
            PhiTable([0.1, 1.0], [0.0, 0.5])

    def test_params_validation(self):
        with pytest.raises(ValueError):
            AlmostInvarianceParams(PhiLinear(1.0), -0.1)
        with pytest.raises(ValueError):
            AlmostInvarianceParams(PhiLinear(1.0), 0.1, horizon=0)

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    @settings(max_examples=40, deadline=None)
    def test_power_concavity_midpoint(self, a, b):
        phi = PhiPower(1.0, 1.0, 2.0)
        assert phi(0.5 * (a + b)) >= 0.5 * (phi(a) + phi(b)) - 1e-12


class TestAbsoluteContinuity:
    def test_full_support_holds(self):
        cert = check_absolute_continuity(TWO_STATE, M_INV)
        assert cert.holds
        assert cert.constants["null_atoms"] == 0

    def test_leak_into_null_atom(self):
        cert = check_absolute_continuity(ABSORBING_PAIR, DELTA0)
        assert not cert.holds
        assert cert.witness == {"atom": "s1", "leak": 1.0}

    def test_generator_probed_through_resolvent(self):
        cert = check_absolute_continuity(SYM, DELTA0)
        assert not cert.holds
        assert cert.constants["probe"] == "resolvent"


class TestOptimalLinearParams:
    def test_invariant_reference_has_no_leak(self):
        out = optimal_linear_params(TWO_STATE, M_INV)
        assert_allclose(out["c"], 3.0)
        assert out["delta"] == 0.0

    def test_counterexample_leaks_everything(self):
        out = optimal_linear_params(ABSORBING_PAIR, DELTA0)
        assert out["c"] == 1.0
        assert out["delta"] == 1.0

    def test_mean_mode_converges_to_same_leak(self):
        out = optimal_linear_params(ABSORBING_PAIR, DELTA0, mode="mean")
        assert out["delta"] == 1.0
        assert out["worst_horizon"] == "limit"

    def test_full_support_uniform(self):
        out = optimal_linear_params(ABSORBING_PAIR, M_UNIFORM)
        assert out == {"c": 2.0, "delta": 0.0, "null_flow_sup": 0.0,
                       "worst_horizon": 1}


class TestAlmostInvariance:
    def test_drifting_mass_fails_at_zero_leakage(self):
        params = AlmostInvarianceParams(PhiLinear(1.0), 0.0)
        cert = check_almost_invariant(TWO_STATE, M_UNIFORM, params)
        assert not cert.holds
        # uniform start converges to (2/3, 1/3): excess on {s0} is 1/6
        assert_allclose(cert.constants["delta_min"], 1 / 6, rtol=1e-12)
        assert cert.witness["set"] == ["s0"]

    def test_holds_with_enough_leakage(self):
        params = AlmostInvarianceParams(PhiLinear(1.0), 0.2)
        cert = check_almost_invariant(TWO_STATE, M_UNIFORM, params)
        assert cert.holds
        assert cert.constants["support_stable"]

    def test_mean_variant_reports_mass_floor(self):
        params = AlmostInvarianceParams(PhiLinear(1.0), 0.2)
        cert = check_mean_almost_invariant(TWO_STATE, M_UNIFORM, params)
        assert cert.holds
        assert_allclose(cert.constants["delta_min"], 1 / 6, rtol=1e-9)
        assert_allclose(cert.constants["mean_mass_liminf"], 1.0)

    def test_optimal_params_always_verify(self):
        rng = np.random.default_rng(7)
        for _ in range(15):
            n = int(rng.integers(2, 9))
            rows = rng.random((n, n)) + 1e-3
            rows /= rows.sum(axis=1, keepdims=True)
            K = Kernel(StateSpace.range(n), rows)
            m = Measure(K.space, rng.random(n) * (rng.random(n) > 0.2))
            if m.mass <= 0:
                continue
            opt = optimal_linear_params(K, m, horizon=64)
            params = AlmostInvarianceParams(PhiLinear(opt["c"]),
                                            opt["delta"] + 1e-12, horizon=64)
            assert check_almost_invariant(K, m, params).holds


class TestIndexProfile:
    def test_counterexample_index_is_total_mass(self):
        prof = index_profile(ABSORBING_PAIR, DELTA0)
        assert_allclose(prof.index_estimate, 1.0)
        assert prof.threshold == 1.0
        assert not prof.holds
        assert prof.exact

    def test_uniform_reference_has_zero_index(self):
        prof = index_profile(ABSORBING_PAIR, M_UNIFORM)
        assert prof.index_estimate == 0.0
        assert prof.holds

    def test_certificate_wrapper(self):
        cert = profile_certificate(index_profile(ABSORBING_PAIR, DELTA0))
        assert not cert.holds
        assert cert.constants["index_estimate"] == 1.0

    def test_grid_must_decrease(self):
        with pytest.raises(ValueError, match="decreasing"):
            index_profile(TWO_STATE, M_INV, eps_grid=[0.1, 0.2])

    def test_fractional_dominates_crisp(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(2, 8))
            rows = rng.random((n, n))
            rows /= rows.sum(axis=1, keepdims=True)
            K = Kernel(StateSpace.range(n), rows)
            m = Measure(K.space, rng.random(n) + 0.01)
            prof = index_profile(K, m, horizon=32)
            for c, f in zip(prof.crisp, prof.fractional):
                assert f >= c - 1e-12


class TestResolventSide:
    def test_invariant_measure_passes(self):
        params = AlmostInvarianceParams(PhiLinear(2.0), 0.0)
        cert = check_resolvent_almost_invariant(SYM, M_UNIFORM, params)
        assert cert.holds
        assert cert.constants["delta_min"] <= 0.0
        assert cert.constants["resolvent_index"] == 0.0

    def test_kernel_input_rejected(self):
        params = AlmostInvarianceParams(PhiLinear(2.0), 0.0)
        with pytest.raises(ValueError, match="continuous-time"):
            check_resolvent_almost_invariant(TWO_STATE, M_UNIFORM, params)

    def test_alpha_grid_must_decrease(self):
        params = AlmostInvarianceParams(PhiLinear(2.0), 0.0)
        with pytest.raises(ValueError, match="decreasing"):
            check_resolvent_almost_invariant(SYM, M_UNIFORM, params,
                                             alphas=[1.0, 2.0])


class TestSeedIndex:
    def test_reachable_space_gives_zero_index(self):
        cert = check_seed_index(SYM, DELTA0, 1.0)
        assert cert.holds
        assert cert.constants["c_tilde"] == 0.0
        assert cert.constants["shift_floor"] == 1.0
        assert len(cert.attached) == 1
        assert cert.attached[0].condition == "index-below-mass"

    def test_reference_mass_scales_with_alpha(self):
        cert = check_seed_index(SYM, DELTA0, 2.0)
        assert_allclose(cert.constants["ref_mass"], 0.5)
        assert_allclose(cert.constants["shift_floor"], 0.25)

    def test_seed_must_be_probability(self):
        with pytest.raises(ValueError, match="probability"):
            check_seed_index(SYM, Measure(S2, [0.4, 0.4]), 1.0)


class TestPartialSubinvariance:
    def test_invariant_support_survives_whole(self):
        cert = check_partial_subinvariance(TWO_STATE, M_INV)
        assert cert.holds
        assert cert.constants["a_mass"] == 1.0
        assert cert.constants["delta"] == 0.0
        assert cert.witness["set"] == ["s0", "s1"]

    def test_absorbing_atom_found_after_peeling(self):
        cert = check_partial_subinvariance(ABSORBING_PAIR, M_UNIFORM)
        assert cert.holds
        assert cert.witness["set"] == ["s1"]
        assert_allclose(cert.constants["delta"], 0.5)
        assert cert.attached[0].holds

    def test_transient_support_is_inconclusive(self):
        cert = check_partial_subinvariance(ABSORBING_PAIR, DELTA0)
        assert cert.verdict == "inconclusive"
        assert not cert.holds


class TestOccupationHalf:
    def test_heavy_target_with_limit_conclusion(self):
        cert = check_occupation_half(TWO_STATE, DELTA0, StateSet(S2, [0]))
        assert cert.holds
        assert_allclose(cert.constants["occupation_limit"], 2 / 3)
        assert cert.attached[0].holds

    def test_light_target_fails(self):
        cert = check_occupation_half(TWO_STATE, DELTA0, StateSet(S2, [1]))
        assert not cert.holds
        assert cert.constants["occupation_sup"] < 0.5

    def test_periodic_boundary_uses_support_fallback(self):
        swap = Kernel(S2, [[0.0, 1.0], [1.0, 0.0]])
        cert = check_occupation_half(swap, DELTA0, StateSet(S2, [0]))
        assert cert.holds
        assert cert.constants["occupation_limit"] == 0.5
        assert "support-based" in cert.notes
        assert cert.attached[0].holds

    def test_start_must_be_probability(self):
        with pytest.raises(ValueError, match="probability"):
            check_occupation_half(TWO_STATE, Measure(S2, [0.2, 0.2]),
                                  StateSet(S2, [0]))


class TestOperatorNorms:
    def test_absorbing_pair_closed_forms(self):
        assert lp_operator_norm(ABSORBING_PAIR, M_UNIFORM, 1)[0] == 2.0
        val, converged, _ = lp_operator_norm(ABSORBING_PAIR, M_UNIFORM, 2)
        assert converged
        assert_allclose(val, np.sqrt(2.0), rtol=1e-10)
        assert lp_operator_norm(ABSORBING_PAIR, M_UNIFORM, np.inf)[0] == 1.0

    def test_invariant_measure_is_contraction_in_l1(self):
        assert lp_operator_norm(TWO_STATE, M_INV, 1)[0] == 1.0

    def test_interpolation_bound(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n = int(rng.integers(2, 7))
            rows = rng.random((n, n))
            rows /= rows.sum(axis=1, keepdims=True)
            K = Kernel(StateSpace.range(n), rows)
            m = Measure(K.space, rng.random(n) + 0.05)
            m1 = lp_operator_norm(K, m, 1)[0]
            mi = lp_operator_norm(K, m, np.inf)[0]
            m2, converged, _ = lp_operator_norm(K, m, 2)
            assert converged
            assert m2 <= np.sqrt(m1 * mi) * (1 + 1e-9)

    def test_needs_full_support(self):
        with pytest.raises(ValueError, match="fully supported"):
            lp_operator_norm(ABSORBING_PAIR, DELTA0, 2)


class TestUniformLpBound:
    def test_symmetric_flow_has_unit_norms(self):
        cert = check_uniform_lp_bound(SYM, M_UNIFORM, 2.0)
        assert cert.holds
        assert_allclose(cert.constants["M"], 1.0, rtol=1e-9)
        assert cert.attached[0].condition == "resolvent-almost-invariance"
        assert cert.attached[0].holds

    def test_caller_bound_enforced(self):
        cert = check_uniform_lp_bound(SYM, M_UNIFORM, 2.0, bound=0.5)
        assert not cert.holds
        assert cert.witness["norm"] >= 0.5

    def test_kernel_input_rejected(self):
        with pytest.raises(ValueError, match="continuous-time"):
            check_uniform_lp_bound(TWO_STATE, M_UNIFORM, 2.0)
