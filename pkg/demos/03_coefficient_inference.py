"""Per-coefficient significance tests with bias correction.

The structured estimators are biased by design, so their coordinates
cannot be tested directly.  The pipeline removes the estimable part of
the bias with a sparse pilot estimate, attaches a deterministic slack
bound for the part that cannot be estimated, and returns conservative
two-sided p-values (plus dependence-robust q-values on request).
"""

import numpy as np

from gmdkit import run_gmdi
from gmdkit.simulate import SettingSpec, build_setting

# full benchmark scale so the signal support is genuinely sparse: only
# the first half of the coordinates carry signal
spec = SettingSpec(setting="I", n=200, p=300, r_squared=0.8, seed=3)
data, beta_star, truth = build_setting(spec)

report = run_gmdi(data, estimator="gmdr", with_qvalues=True)

alpha = 0.05
reject = report.p_value <= alpha
print(f"noise variance estimate: {report.sigma2_hat:.3f}")
print(f"rejections at alpha={alpha}: {int(reject.sum())} of {data.p}")
print(f"  on truly nonzero coordinates: {int(reject[truth].sum())}"
      f" / {int(truth.sum())}")
print(f"  on truly zero coordinates:    {int(reject[~truth].sum())}"
      f" / {int((~truth).sum())} (should be near "
      f"{alpha * (~truth).sum():.0f} or fewer)")

discoveries = report.q_value <= 0.1
print(f"discoveries at q <= 0.1: {int(discoveries.sum())}, "
      f"false: {int(discoveries[~truth].sum())}")

# The slack bound also yields the smallest effect size the test is
# guaranteed to detect for a given coordinate.
from gmdkit.inference import min_detectable_effect

j = int(np.argmax(np.abs(beta_star)))
mde = min_detectable_effect(report.xi_diag[j], report.psi[j],
                            report.r_jj[j])
print(f"coordinate {j}: |effect| needed for 80% power: {mde:.3f} "
      f"(true value {beta_star[j]:.3f})")
