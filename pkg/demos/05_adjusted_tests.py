"""Adjusted tests on one balanced trial.

The trial balances (1, x1, x2, x3) but the analysis sees only the responses
and assignments (a misspecified working model). The classical test then uses
too large a variance scale and under-rejects; each adjusted test replaces it
with a consistent estimate of the right scale.
"""

import numpy as np

from carlab.allocation import EfronBiasedCoin
from carlab.datagen import CovariateSetting, LinearModel, gen_covariate_matrix, gen_responses
from carlab.engine import simulate_assignments
from carlab.features import Composite, Constant, Identity, feature_matrix
from carlab.inference import (
    TrialDataset, adjusted_test, block_length, lse_fit, sigma_tau_bootstrap,
    sigma_tau_mb, sigma_tau_mbb, sigma_tau_mbj, sigma_tau_reg, t_ls,
)

rng = np.random.default_rng(42)
n = 500
X = gen_covariate_matrix(CovariateSetting("S1"), n, rng)
phi = feature_matrix(Composite(terms=(Constant(), Identity(0), Identity(1), Identity(2))), X)
policy = EfronBiasedCoin(0.9)
treat = (simulate_assignments(phi, policy, 2, rng) == 0).astype(float)
model = LinearModel(mu1=0.9, mu0=0.0)  # a real effect of 0.9
y = gen_responses(model, X, treat, rng)

data = TrialDataset(y=y, t=treat, x_obs=None, phi=phi)  # no covariates at analysis
fit = lse_fit(data)
l = block_length(n)
print(f"n={n}, arms {int(fit.n1)}/{int(fit.n0)}, effect estimate tau = {fit.tau_hat:.4f}")
print(f"naive residual variance {fit.sigma_e2:.3f} "
      f"(true for this model: noise 4 + unexplained covariates 3 = 7)")

res = t_ls(fit)
print(f"\n{'test':<22} {'variance':>9} {'statistic':>10} {'p':>8}")
print(f"{'classical':<22} {fit.sigma_e2:9.3f} {res.statistic:10.3f} {res.p_value:8.4f}")

estimates = [
    ("regression on phi", sigma_tau_reg(fit, phi), "gram"),
    ("rerandomize bootstrap", sigma_tau_bootstrap(data, policy, 200, rng), "direct"),
    ("moving block", sigma_tau_mb(fit, l), "gram"),
    ("moving block jackknife", sigma_tau_mbj(data, l), "direct"),
    ("moving block bootstrap", sigma_tau_mbb(data, l, 200, rng), "direct"),
]
for label, v, mode in estimates:
    res = adjusted_test(fit, v, mode)
    print(f"{label:<22} {v.value:9.3f} {res.statistic:10.3f} {res.p_value:8.4f}")

print("\nThe adjusted scales sit near the true value 4 and recover the power the")
print("classical test gives away (its scale is near 7). All five are consistent;")
print("the block family needs only the working-model data.")
