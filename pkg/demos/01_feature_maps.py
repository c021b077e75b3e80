"""Feature maps: what a covariate-adaptive design actually balances.

Each design balances the per-arm sums of a feature vector phi(x). The four
families below trade off what gets balanced: whole strata, per-covariate
margins, a weighted mix, or raw continuous values with interactions.
"""

import numpy as np

from carlab.features import (
    Composite, Constant, HuHu, Identity, Marginal, Power, Product, Stratified,
    apply_feature_map, discretize, feature_dim,
)

x = np.array([1.0, 0.0])  # two binary covariates
levels = ((0.0, 1.0), (0.0, 1.0))

print("covariates:", x)

strat = Stratified(coords=(0, 1), levels=levels)
print(f"\nStratified (q={feature_dim(strat)}): one-hot over the stratum cross")
print("  phi(x) =", apply_feature_map(strat, x), " (strata ordered (0,0),(0,1),(1,0),(1,1))")

marg = Marginal(coords=(0, 1), levels=levels)
print(f"\nMarginal (q={feature_dim(marg)}): one indicator per (covariate, level)")
print("  phi(x) =", apply_feature_map(marg, x))

hh = HuHu(coords=(0, 1), levels=levels, w0=1.0, w_margins=(1.0, 1.0), w_stratum=1.0)
print(f"\nHuHu (q={feature_dim(hh)}): sqrt-weighted constant + margins + strata")
print("  phi(x) =", apply_feature_map(hh, x))

comp = Composite(terms=(Constant(), Identity(0), Identity(1), Product(0, 1), Power(0, 2)))
xc = np.array([2.0, 3.0])
print(f"\nComposite (q={feature_dim(comp)}): raw values, products, powers")
print(f"  phi({xc}) =", apply_feature_map(comp, xc))

print("\nDiscretization for stratum/margin designs on continuous covariates")
print("  cut points (0, 2): value -0.5 ->", discretize(-0.5, (0, 2)),
      "| 0 ->", discretize(0.0, (0, 2)),
      "| 1 ->", discretize(1.0, (0, 2)),
      "| 2 ->", discretize(2.0, (0, 2)))
