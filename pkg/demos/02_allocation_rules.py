"""Allocation rules: turning potential imbalances into probabilities.

Every rule favors arms whose hypothetical assignment leaves the trial less
imbalanced, stays symmetric under arm relabeling, and never becomes
deterministic.
"""

import numpy as np

from carlab.allocation import (
    complete_randomization,
    continuous_multi,
    continuous_two_treatment,
    efron_two_treatment,
    pocock_simon_multi,
)

print("Two arms: probability of arm 1 as a function of the imbalance difference")
print(f"{'diff':>8} {'biased coin (rho=0.9)':>22} {'normal tail (cap=3)':>20}")
for diff in (-8.0, -2.0, -0.5, 0.0, 0.5, 2.0, 8.0):
    bc = efron_two_treatment(diff, 0.9)
    ct = continuous_two_treatment(diff, 3.0)
    print(f"{diff:8.1f} {bc:22.3f} {ct:20.4f}")
print("The biased coin reacts only to the sign; the normal-tail rule scales with")
print("the size of the difference and clamps at +-cap so no arm is ever frozen out.")

print("\nThree arms, rank probabilities kappa = (0.8, 0.1, 0.1):")
imb = [7.0, 3.0, 5.0]
print(f"  potential imbalances {imb} -> {pocock_simon_multi(imb, (0.8, 0.1, 0.1))}")
imb = [3.0, 3.0, 9.0]
print(f"  tied arms share their ranks' mean: {imb} -> {pocock_simon_multi(imb, (0.8, 0.1, 0.1))}")

print("\nThree arms, normalized normal tails of the deviations from the mean:")
dev = np.array([-1.0, 0.0, 1.0])
print(f"  deviations {dev} -> {np.round(continuous_multi(dev, 3.0), 5)}")

print("\nComplete randomization ignores the state:", complete_randomization(3))
