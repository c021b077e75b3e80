"""One sequential trial, step by step.

The engine keeps the per-arm feature imbalance matrix up to date and prices
each arm by the total imbalance its assignment would create. Watch the
balanced design hold the imbalance near zero while complete randomization
drifts like a random walk.
"""

import numpy as np

from carlab.allocation import CompleteRandomization, EfronBiasedCoin
from carlab.datagen import CovariateSetting, gen_covariate_matrix
from carlab.engine import assign_next, new_trial, potential_imbalances, total_imbalance
from carlab.features import Composite, Constant, Identity, feature_matrix

rng = np.random.default_rng(7)
n = 400
X = gen_covariate_matrix(CovariateSetting("S1"), n, rng)
phi = feature_matrix(
    Composite(terms=(Constant(), Identity(0), Identity(1), Identity(2))), X
)

state_car = new_trial(treatments=2, q=phi.shape[1])
state_cr = new_trial(treatments=2, q=phi.shape[1])
rng_car = np.random.default_rng(11)
rng_cr = np.random.default_rng(11)

print("first five assignments under the biased coin:")
for i in range(n):
    if i < 5:
        pot = potential_imbalances(state_car, phi[i])
        arm = assign_next(state_car, phi[i], EfronBiasedCoin(0.9), rng_car)
        print(f"  unit {i}: potentials {np.round(pot, 3)} -> arm {arm}")
    else:
        assign_next(state_car, phi[i], EfronBiasedCoin(0.9), rng_car)
    assign_next(state_cr, phi[i], CompleteRandomization(), rng_cr)
    if (i + 1) in (50, 100, 200, 400):
        print(
            f"  after {i + 1:3d} units: total imbalance "
            f"balanced={total_imbalance(state_car):8.3f}   "
            f"complete randomization={total_imbalance(state_cr):9.2f}"
        )

print("\narm counts, balanced design:", state_car.counts)
print("arm counts, complete randomization:", state_cr.counts)
print("imbalance matrix rows always sum to zero:",
      np.abs(state_car.lam.sum(axis=0)).max() < 1e-9)
