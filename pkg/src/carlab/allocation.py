"""Allocation rules: map potential imbalances to assignment probabilities.

Every rule outputs a probability vector on the simplex and favors the arm
whose hypothetical assignment leaves the trial least imbalanced.  Rules are
symmetric under relabeling of arms and keep every probability strictly
positive (away from deterministic minimization).

Two-arm rules take the scalar difference between the two potential
imbalances; multi-arm rules take the full vector.  The normal-CDF variants
clamp their argument to +-cap before evaluating the tail, so far-from-balance
states still receive a fixed small probability; cap = 3 is the conventional
choice.  Any positive decreasing weight function would fit the same template;
only the normal-tail variant is built in (see ``continuous_multi``).
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ._normal import normal_upper
from .errors import DomainError

__all__ = [
    "CompleteRandomization",
    "EfronBiasedCoin",
    "TwoTreatmentContinuous",
    "PocockSimonRank",
    "MultiContinuous",
    "AllocationPolicy",
    "efron_two_treatment",
    "continuous_two_treatment",
    "pocock_simon_multi",
    "continuous_multi",
    "complete_randomization",
]


@dataclass(frozen=True)
class CompleteRandomization:
    """Equal probability for every arm, ignoring imbalance."""


@dataclass(frozen=True)
class EfronBiasedCoin:
    """Pick the imbalance-reducing arm with fixed probability rho."""

    rho: float = 0.9

    def __post_init__(self):
        if not (0.5 < self.rho < 1.0):
            raise DomainError(f"biased-coin rho must lie in (0.5, 1), got {self.rho!r}")


@dataclass(frozen=True)
class TwoTreatmentContinuous:
    """Two-arm normal-tail rule: p = 1 - Phi(imbalance difference), clamped to +-cap."""

    cap: float = 3.0

    def __post_init__(self):
        if not (self.cap > 0) or not math.isfinite(self.cap):
            raise DomainError(f"clamp bound must be positive, got {self.cap!r}")


@dataclass(frozen=True)
class PocockSimonRank:
    """Arms ranked by potential imbalance receive fixed ordered probabilities."""

    kappa: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        kappa = tuple(float(k) for k in self.kappa)
        _validate_kappa(kappa)
        object.__setattr__(self, "kappa", kappa)


@dataclass(frozen=True)
class MultiContinuous:
    """Multi-arm normal-tail rule with clamped deviations, normalized to sum 1."""

    cap: float = 3.0

    def __post_init__(self):
        if not (self.cap > 0) or not math.isfinite(self.cap):
            raise DomainError(f"clamp bound must be positive, got {self.cap!r}")


AllocationPolicy = Union[
    CompleteRandomization,
    EfronBiasedCoin,
    TwoTreatmentContinuous,
    PocockSimonRank,
    MultiContinuous,
]


def _validate_kappa(kappa):
    if len(kappa) < 2:
        raise DomainError("rank probabilities need at least two entries")
    if any(not (k > 0) for k in kappa):
        raise DomainError("rank probabilities must be positive")
    if any(a < b for a, b in zip(kappa, kappa[1:])):
        raise DomainError("rank probabilities must be non-increasing")
    if not kappa[0] > kappa[-1]:
        raise DomainError("first rank probability must exceed the last")
    if abs(sum(kappa) - 1.0) > 1e-9:
        raise DomainError(f"rank probabilities must sum to 1, got {sum(kappa)!r}")


def _check_finite(x, what):
    if isinstance(x, float) or isinstance(x, int):
        if math.isnan(x) or math.isinf(x):
            raise DomainError(f"{what} must be finite, got {x!r}")
        return float(x)
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{what} must be finite")
    return arr


def efron_two_treatment(diff: float, rho: float) -> float:
    """Probability of arm 1 given the (arm 1 minus arm 2) potential-imbalance
    difference: rho when the difference is negative, 1 - rho when positive,
    0.5 on an exact tie."""
    diff = _check_finite(diff, "imbalance difference")
    if not (0.5 < rho < 1.0):
        raise DomainError(f"biased-coin rho must lie in (0.5, 1), got {rho!r}")
    if diff < 0.0:
        return rho
    if diff > 0.0:
        return 1.0 - rho
    return 0.5


def continuous_two_treatment(diff: float, cap: float) -> float:
    """Probability of arm 1: upper normal tail of the clamped difference."""
    diff = _check_finite(diff, "imbalance difference")
    if not (cap > 0) or not math.isfinite(cap):
        raise DomainError(f"clamp bound must be positive, got {cap!r}")
    x = min(max(diff, -cap), cap)
    return normal_upper(x)


def pocock_simon_multi(imbalances, kappa) -> np.ndarray:
    """Assign rank probabilities by sorted potential imbalance.

    The arm with the t-th smallest potential imbalance receives kappa[t].
    Arms tied exactly share the arithmetic mean of their ranks' kappa values,
    which is the unique tie rule preserving symmetry across arm labels.
    """
    imbalances = _check_finite(imbalances, "potential imbalances")
    imbalances = np.atleast_1d(imbalances)
    kappa = tuple(float(k) for k in kappa)
    _validate_kappa(kappa)
    T = imbalances.shape[0]
    if len(kappa) != T:
        raise DomainError(
            f"rank probabilities have length {len(kappa)} but {T} arms were given"
        )
    order = sorted(range(T), key=lambda i: imbalances[i])
    probs = np.empty(T)
    i = 0
    while i < T:
        j = i
        while j + 1 < T and imbalances[order[j + 1]] == imbalances[order[i]]:
            j += 1
        share = sum(kappa[i : j + 1]) / (j - i + 1)
        for k in range(i, j + 1):
            probs[order[k]] = share
        i = j + 1
    return probs


def continuous_multi(deviations, cap: float) -> np.ndarray:
    """Normalized upper normal tails of clamped per-arm deviations."""
    deviations = _check_finite(deviations, "imbalance deviations")
    deviations = np.atleast_1d(deviations)
    if not (cap > 0) or not math.isfinite(cap):
        raise DomainError(f"clamp bound must be positive, got {cap!r}")
    weights = np.array(
        [normal_upper(min(max(float(x), -cap), cap)) for x in deviations]
    )
    return weights / weights.sum()


def complete_randomization(treatments: int) -> np.ndarray:
    """Uniform probability vector over the arms."""
    if int(treatments) != treatments or treatments < 2:
        raise DomainError(f"need at least 2 arms, got {treatments!r}")
    return np.full(int(treatments), 1.0 / treatments)
