"""Certificate checkers: drift, smallness, almost-invariance, moduli."""

from .types import FAILS, HOLDS, INCONCLUSIVE, Certificate, IndexProfile
from .phi import AlmostInvarianceParams, PhiLinear, PhiPower, PhiTable
from .worstset import (KnapsackResult, WorstSet, fractional_knapsack,
                       knapsack_best, signed_excess, worst_set_search)
from .averages import (LIMIT, continuous_mean_rows, continuous_power_rows,
                       geometric_horizons, limit_row, mean_rows, power_rows)
from .drift import (additive_drift_occupation_bound, check_additive_drift,
                    check_concentration, check_dominated_rows,
                    check_drift_concentration, check_drift_cost_moment,
                    check_generalized_drift, check_geometric_drift,
                    check_localized_drift, check_smallness,
                    fit_drift_constants, generalized_drift_occupation_bound,
                    invariant_count_bound, mean_row_gap, power_row_gap)
from .almost import (check_absolute_continuity, check_almost_invariant,
                     check_mean_almost_invariant, check_occupation_half,
                     check_partial_subinvariance,
                     check_resolvent_almost_invariant, check_seed_index,
                     check_uniform_lp_bound, index_profile, lp_operator_norm,
                     optimal_linear_params, profile_certificate)

__all__ = [
    "Certificate", "IndexProfile", "HOLDS", "FAILS", "INCONCLUSIVE",
    "PhiLinear", "PhiPower", "PhiTable", "AlmostInvarianceParams",
    "WorstSet", "worst_set_search", "signed_excess",
    "KnapsackResult", "knapsack_best", "fractional_knapsack",
    "LIMIT", "geometric_horizons", "power_rows", "mean_rows",
    "continuous_power_rows", "continuous_mean_rows", "limit_row",
    "check_smallness", "fit_drift_constants", "check_geometric_drift",
    "check_localized_drift", "check_additive_drift", "power_row_gap",
    "mean_row_gap", "check_dominated_rows", "check_concentration",
    "check_generalized_drift", "check_drift_cost_moment",
    "check_drift_concentration", "invariant_count_bound",
    "additive_drift_occupation_bound", "generalized_drift_occupation_bound",
    "check_absolute_continuity", "optimal_linear_params",
    "check_almost_invariant", "check_mean_almost_invariant",
    "index_profile", "profile_certificate",
    "check_resolvent_almost_invariant", "check_seed_index",
    "check_partial_subinvariance", "check_occupation_half",
    "check_uniform_lp_bound", "lp_operator_norm",
]
