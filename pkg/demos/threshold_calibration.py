"""
Choosing a threshold for a target run length
============================================

The constant C is an integral of Siegmund's overshoot function. Given C,
the threshold for a target ARL gamma on M streams is log(C M gamma). The
run-length bound carries an extra 1/sqrt(lambda) factor, so the realised
ARL sits between the bound and gamma.
"""

import math

from banditqcd import TrialConfig, arl_lower_bound, calibrate, estimate_arl, g_function

for x in (0.1, 1.0, 5.0):
    print(f"g({x}) = {g_function(x):.6f}")

res = calibrate(500.0, 1)
print(f"\nC = {res.c_constant:.12f} (+/- {res.quadrature_error_estimate:.1g})")
print(f"threshold for gamma=500, M=1: {res.threshold:.4f}")
print(f"bound at that threshold: {arl_lower_bound(res.threshold, 1, res.c_constant):.1f}")

s = estimate_arl(TrialConfig(1, math.inf, 0.0, res.threshold, seed=5), 300)
print(f"simulated ARL: {s.mean:.1f} +/- {s.std_error:.1f}")
