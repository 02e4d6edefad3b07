"""
Detection delay and run length by Monte Carlo
=============================================

Expected detection delay grows linearly in the threshold, while the average
run length under no change grows exponentially. Trials use independent
seeds derived from one master seed, so the numbers below are reproducible.
"""

import math

from banditqcd import TrialConfig, estimate_arl, estimate_edd

print("EDD, M=5, mu1=1, nu=0")
for lam in (10.0, 20.0, 40.0):
    s = estimate_edd(TrialConfig(5, 0, 1.0, lam, seed=1), 200)
    print(f"  lambda={lam:5.1f}  EDD={s.mean:7.1f} +/- {s.std_error:5.1f}  ratio to 2*lambda/mu1^2: "
          f"{s.mean / (2 * lam):.2f}")

print("\nARL, M=1")
for lam in (math.log(100), math.log(1000)):
    s = estimate_arl(TrialConfig(1, math.inf, 0.0, lam, horizon=50_000, seed=2), 200)
    print(f"  lambda=log {math.exp(lam):.0f}  ARL={s.mean:7.1f} +/- {s.std_error:5.1f}  [{s.status}]")
