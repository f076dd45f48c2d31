"""Protect inference against a partially wrong row kernel.

When the supplied H captures only part of the real sample dependence,
plain inference can over- or under-reject.  The robust path blends the
candidate with the identity, H(tau) = tau*H + (1-tau)*I, fits tau by
marginal likelihood, and re-runs inference under the blend.  A fully
informative H earns tau near 1; a partially informative one is shrunk
toward the identity.
"""

import numpy as np

from gmdkit.robust import estimate_tau, run_robust_gmdi
from gmdkit.simulate import SettingSpec, build_setting

for theta in (1.0, 0.8, 0.5):
    spec = SettingSpec(setting="IV", n=100, p=60, theta=theta, seed=2)
    data, _, truth = build_setting(spec)
    rob = estimate_tau(data)
    print(f"structure informativeness theta={theta}: "
          f"fitted blend weight tau = {rob.tau_hat:.3f} "
          f"(converged: {rob.converged})")

# Full inference under the fitted blend, at a scale with sparse signal:
spec = SettingSpec(setting="IV", n=200, p=300, theta=0.5, seed=2)
data, _, truth = build_setting(spec)
report = run_robust_gmdi(data, estimator="kpr")
reject = report.p_value <= 0.05
print(f"\nblended inference with tau={report.tau_hat:.3f}:")
print(f"  rejections on true signals: {int(reject[truth].sum())}"
      f" / {int(truth.sum())}")
print(f"  rejections on true zeros:   {int(reject[~truth].sum())}"
      f" / {int((~truth).sum())}")
