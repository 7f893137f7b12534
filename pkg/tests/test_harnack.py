"""Row comparison constants, the drift pipeline, and lazy perturbations."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize

from ergocert.core import Kernel, Measure, StateFn, StateSpace
from ergocert.harnack import (
    PerturbationSpec,
    certify_harnack_pipeline,
    certify_perturbation,
    check_harnack_drift,
    diagnose_lazy_atoms,
    harnack_constant,
    harnack_maximizer,
    perturb,
)
from ergocert.scenarios import birth_death

S2 = StateSpace.range(2)
S3 = StateSpace.range(3)
DOEBLIN = Kernel(S2, [[0.5, 0.5], [0.25, 0.75]])
TWO_STATE = Kernel(S2, [[0.9, 0.1], [0.2, 0.8]])
FLAT = Kernel(S2, [[0.5, 0.5], [0.5, 0.5]])
V01 = [0.0, 1.0]


def numeric_row_ratio_max(rx, ry, p):
    """Independent maximization of (ry.f)^p / (rx.f^p) over f = exp(u)."""

    def neg_log_ratio(u):
        f = np.exp(u)
        return -(p * np.log(ry @ f) - np.log(rx @ f ** p))

    def grad(u):
        f = np.exp(u)
        top = ry @ f
        bot = rx @ f ** p
        return -(p * ry * f / top - p * rx * f ** p / bot)

    out = minimize(neg_log_ratio, np.zeros(len(rx)), jac=grad,
                   method="BFGS", options={"gtol": 1e-12, "maxiter": 500})
    return float(np.exp(-out.fun))


class TestHarnackConstant:
    def test_doeblin_pair_closed_form(self):
        hc = harnack_constant(DOEBLIN, 0, 1, 2.0)
        # sum of ry^2 / rx = 0.0625/0.5 + 0.5625/0.5
        assert_allclose(hc.M, 1.25)
        assert hc.finite

    def test_identical_rows_give_one(self):
        assert harnack_constant(DOEBLIN, 1, 1, 2.0).M == 1.0

    def test_support_violation_is_infinite(self):
        hc = harnack_constant(Kernel(S2, np.eye(2)), 0, 1, 2.0)
        assert np.isinf(hc.M)
        assert not hc.finite

    def test_p_must_exceed_one(self):
        with pytest.raises(ValueError):
            harnack_constant(DOEBLIN, 0, 1, 1.0)

    def test_maximizer_attains_constant(self):
        hc = harnack_constant(DOEBLIN, 0, 1, 2.0)
        f = harnack_maximizer(DOEBLIN, 0, 1, 2.0).values
        rx, ry = DOEBLIN.rows[0], DOEBLIN.rows[1]
        attained = (ry @ f) ** 2 / (rx @ f ** 2)
        assert attained >= (1.0 - 1e-9) * hc.M

    def test_sharpness_against_numeric_maximization(self):
        rng = np.random.default_rng(17)
        for p in (1.5, 2.0, 4.0):
            for _ in range(12):
                n = int(rng.integers(2, 7))
                rows = rng.random((2, n)) + 0.05
                rows /= rows.sum(axis=1, keepdims=True)
                K = Kernel(StateSpace.range(n), np.vstack(
                    [rows, np.tile(rows[1], (n - 2, 1))])
                    if n > 2 else rows)
                hc = harnack_constant(K, 0, 1, p)
                numeric = numeric_row_ratio_max(K.rows[0], K.rows[1], p)
                assert_allclose(numeric, hc.M, rtol=1e-6)
                f = harnack_maximizer(K, 0, 1, p).values
                attained = ((K.rows[1] @ f) ** p
                            / (K.rows[0] @ f ** p))
                assert attained >= (1.0 - 1e-9) * hc.M


class TestHarnackDrift:
    def test_doeblin_window(self):
        cert = check_harnack_drift(DOEBLIN, V01, 0.75, 0.5, [0, 1], 0, 2.0)
        assert cert.holds
        assert_allclose(cert.constants["M_star"], 1.25)
        assert cert.constants["drift_gap"] <= 1e-12

    def test_drift_violation_reported(self):
        cert = check_harnack_drift(DOEBLIN, V01, 0.75, 0.0, [0, 1], 0, 2.0)
        assert not cert.holds
        assert cert.witness["state"] == "s0"

    def test_infinite_constant_reported(self):
        eye = Kernel(S2, np.eye(2))
        cert = check_harnack_drift(eye, V01, 0.5, 1.0, [0, 1], 0, 2.0)
        assert not cert.holds
        assert np.isinf(cert.constants["M_star"])


class TestHarnackPipeline:
    def test_two_state_certifies(self):
        cert = certify_harnack_pipeline(TWO_STATE, V01, [0, 1])
        assert cert.holds
        assert_allclose(cert.constants["gamma"], 0.8)
        assert_allclose(cert.constants["c"], 0.1)
        assert_allclose(cert.constants["M_star"], 58 / 9)
        assert cert.constants["invariant_mass"] > 0
        assert cert.constants["invariant_residual"] <= 1e-12
        assert all(a.holds for a in cert.attached)

    def test_no_contraction_is_inconclusive(self):
        up = Kernel(S3, [[0.0, 1.0, 0.0],
                         [0.0, 0.0, 1.0],
                         [0.0, 0.0, 1.0]])
        cert = certify_harnack_pipeline(up, [1.0, 2.0, 4.0], [0, 1, 2])
        assert cert.verdict == "inconclusive"
        assert cert.witness == {"state": "s0", "ratio": 2.0}

    def test_disjoint_supports_fail(self):
        bd = birth_death(40, 0.7)
        cert = certify_harnack_pipeline(bd.kernel, bd.V,
                                        np.ones(40, dtype=bool))
        assert not cert.holds
        assert np.isinf(cert.constants["M_star"])
        assert "escapes the support" in cert.notes

    def test_default_reference_is_v_minimizer(self):
        cert = certify_harnack_pipeline(TWO_STATE, V01, [0, 1])
        assert cert.constants["z0"] == "s0"


class TestPerturbationSpec:
    def test_mixture_rows(self):
        spec = PerturbationSpec(StateFn(S2, [0.4, 0.6]))
        assert spec.a == 0.4
        assert spec.b == 0.6
        mixed = perturb(FLAT, spec)
        assert_allclose(mixed.rows, [[0.8, 0.2], [0.3, 0.7]])

    def test_weights_must_be_positive(self):
        with pytest.raises(ValueError, match="strictly positive"):
            PerturbationSpec(StateFn(S2, [0.0, 0.5]))

    def test_weights_capped_at_one(self):
        with pytest.raises(ValueError, match="exceed one"):
            PerturbationSpec(StateFn(S2, [1.2, 0.5]))

    def test_rho_one_reproduces_p(self):
        spec = PerturbationSpec(StateFn(S2, [1.0, 1.0]))
        assert_allclose(perturb(TWO_STATE, spec).rows, TWO_STATE.rows)


class TestCertifyPerturbation:
    def setup_method(self):
        self.spec = PerturbationSpec(StateFn(S2, [0.4, 0.6]))

    def test_threshold_violation(self):
        cert = certify_perturbation(FLAT, V01, 0.9, 0.5, self.spec,
                                    1.0, 0.0, 0, 2.0, 1.0)
        assert not cert.holds
        assert_allclose(cert.constants["threshold"], 23 / 30)
        assert cert.witness["l"] == 1.0

    def test_identity_mixture_certifies(self):
        cert = certify_perturbation(FLAT, V01, 0.3, 0.5, self.spec,
                                    1.0, 0.0, 0, 2.0, 1.0)
        assert cert.holds
        assert cert.constants["M"] == 1.0
        assert_allclose(cert.constants["composite_coeff"], 0.78)
        assert_allclose(cert.constants["composite_additive"], 0.3)
        assert cert.constants["invariant_residual"] <= 1e-12
        assert cert.attached[0].holds

    def test_large_eta_inflates_additive_term(self):
        cert = certify_perturbation(FLAT, V01, 0.3, 0.5, self.spec,
                                    1.0, 100.0, 0, 2.0, 1.0)
        assert cert.holds
        assert_allclose(cert.constants["composite_additive"], 60.3)

    def test_base_drift_failure(self):
        cert = certify_perturbation(FLAT, V01, 0.3, 0.0, self.spec,
                                    1.0, 0.0, 0, 2.0, 1.0)
        assert not cert.holds
        assert cert.witness == {"state": "s0", "violation": 0.5,
                                "failed": "base-drift"}

    def test_mixing_bound_must_stay_below_one(self):
        spec = PerturbationSpec(StateFn(S2, [1.0, 0.5]))
        with pytest.raises(ValueError, match="strictly below one"):
            certify_perturbation(FLAT, V01, 0.3, 0.5, spec,
                                 1.0, 0.0, 0, 2.0, 1.0)


class TestDiagnoseLazyAtoms:
    def test_uniform_laziness_on_swap(self):
        spec = PerturbationSpec(StateFn(S2, [0.5, 0.5]))
        swap = Kernel(S2, [[0.0, 1.0], [1.0, 0.0]])
        out = diagnose_lazy_atoms(swap, spec, C=[0, 1])
        assert out["lower_bound_ok"]
        assert out["tail_sups"] == [1.0, 0.5, 0.0]
        assert out["floor"] == 0.5
        assert out["floor_respected"]
        assert out["one_step_gap_loopless"] == 0.0
        assert out["exact_column_states"] == []

    def test_unreachable_state_matches_lower_bound_exactly(self):
        spec = PerturbationSpec(StateFn(S2, [0.5, 0.5]))
        shift = Kernel(S2, [[0.0, 1.0], [0.0, 1.0]])
        out = diagnose_lazy_atoms(shift, spec, C=[0, 1])
        assert out["exact_column_states"] == ["s0"]
        assert out["exact_identity_gap"] == 0.0

    def test_requires_identity_companion(self):
        spec = PerturbationSpec(StateFn(S2, [0.5, 0.5]),
                                Q=Kernel(S2, [[0.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(ValueError, match="identity"):
            diagnose_lazy_atoms(FLAT, spec, C=[0, 1])

    def test_window_from_sublevel(self):
        spec = PerturbationSpec(StateFn(S2, [0.5, 0.5]))
        out = diagnose_lazy_atoms(TWO_STATE, spec, V=V01, r=0.0)
        assert out["tail_sizes"][0] == 1
