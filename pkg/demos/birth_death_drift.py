# Drift certificates on a reflecting birth-death chain.
#
# The chain steps down with probability p_down > 1/2, so the linear
# function V(x) = x / (2 p_down - 1) drops by one in expectation at
# every interior state and the bottom state pays the positive excess.
# From that single drift inequality the checker derives, and verifies,
# an occupation floor and two almost-invariance certificates for the
# resolvent-averaged reference measure.

import numpy as np

from ergocert.certificates.drift import (
    additive_drift_occupation_bound,
    check_additive_drift,
    check_drift_concentration,
    check_smallness,
)
from ergocert.certificates.phi import AlmostInvarianceParams, PhiLinear
from ergocert.scenarios import birth_death

bd = birth_death(16, 0.7)
b = bd.extras["drift_b"]
print(f"chain on {bd.kernel.size} states, p_down = {bd.extras['p_down']},"
      f" drift excess b = {b:.4f}")

# Step 1: the one-step drift inequality itself.
cert = check_additive_drift(bd.kernel, bd.V, b, bd.C)
print(f"additive drift: {cert.verdict},"
      f" max violation {cert.constants['max_violation']:.2e}")

# Step 2: drift buys time spent near the bottom. The floor eps/(2b)
# holds for every horizon past the burn-in n0 and for the limit.
out = additive_drift_occupation_bound(bd.kernel, bd.V, b, bd.C, bd.m)
print(f"occupation floor {out['bound']:.4f} from n0 = {out['n0']},"
      f" observed minimum {min(out['values']):.4f}, ok = {out['ok']}")

# Step 3: the bottom state is small in the coupling sense, which is the
# concentration half of the argument.
small = check_smallness(bd.kernel, bd.C.members)
print(f"smallness of C: {small.verdict}, alpha = "
      f"{small.constants['alpha']:.3f}")

# Step 4: the full conjunction. Cost vector: only the bottom state pays.
b_vals = np.zeros(bd.kernel.size)
b_vals[0] = b

# the concentration modulus needs a slope dominating row/reference
# ratios at the paying state
row0 = bd.kernel.rows[0]
slope = max(row0[0] / bd.m.weights[0], row0[1] / bd.m.weights[1]) + 0.5
params = AlmostInvarianceParams(PhiLinear(slope), 0.05, horizon=96)
combined = check_drift_concentration(bd.kernel, bd.m, bd.V, b_vals,
                                     bd.C, params)
print(f"drift + concentration: {combined.verdict}")
for att in combined.attached:
    detail = ""
    if att.condition == "mean-almost-invariance":
        detail = (f"  (delta~ = {combined.constants['delta_tilde']:.4f}"
                  f" from n >= {combined.constants['n0_star']})")
    if att.condition == "almost-invariance":
        detail = (f"  (optimal linear constants c = "
                  f"{combined.constants['plain_c']:.3f},"
                  f" delta = {combined.constants['plain_delta']:.2e})")
    print(f"  attached {att.condition}: {att.verdict}{detail}")

# The reference here is the stationary measure, so the almost-invariance
# leakage is numerically zero; rerun with a lopsided reference to see a
# genuine positive delta survive the same pipeline.
lopsided = bd.m.weights.copy()
lopsided[: bd.kernel.size // 2] *= 3.0
from ergocert.core import Measure  # noqa: E402

m2 = Measure(bd.kernel.space, lopsided).normalized()
slope2 = max(row0[0] / m2.weights[0], row0[1] / m2.weights[1]) + 0.5
combined2 = check_drift_concentration(
    bd.kernel, m2, bd.V, b_vals, bd.C,
    AlmostInvarianceParams(PhiLinear(slope2), 0.2, horizon=96))
print(f"lopsided reference: {combined2.verdict},"
      f" plain delta = {combined2.constants['plain_delta']:.4f}")
