"""Sequential trial engine.

The running state of a trial is the T x q matrix whose row t is the feature
imbalance of arm t: the sum over assigned units of (indicator(unit in arm t)
minus 1/T) times the unit's feature vector.  Rows always sum to the zero
vector.  The total imbalance is the squared Frobenius norm of this matrix,
and the potential imbalance of arm t is that norm recomputed as if the next
unit joined arm t.  The incremental identity

    potential(t) = ||state||^2 + (1 - 1/T) * ||phi||^2 + 2 <state[t], phi>

makes each step O(T q) instead of O(n T q).

Two-arm rules are parameterized on the scale of the two-arm formulation, in
which the imbalance vector carries coefficients +-1 rather than +-1/2; the
difference of potential imbalances on that scale is exactly twice the
difference computed from the general state, so the engine doubles the
difference before calling a two-arm rule.  This keeps the conventional
clamp bound (cap = 3) meaningful for continuous allocation.

Sampling uses a single uniform draw per unit against the cumulative
probability vector in arm order, so seeded runs replay exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from .allocation import (
    AllocationPolicy,
    CompleteRandomization,
    EfronBiasedCoin,
    MultiContinuous,
    PocockSimonRank,
    TwoTreatmentContinuous,
    complete_randomization,
    continuous_multi,
    continuous_two_treatment,
    efron_two_treatment,
    pocock_simon_multi,
)
from .errors import DomainError

__all__ = [
    "TrialState",
    "AssignmentRecord",
    "new_trial",
    "potential_imbalances",
    "allocation_probabilities",
    "assign_next",
    "simulate_assignments",
    "total_imbalance",
    "imbalance_metrics",
    "ImbalanceAccumulator",
]


@dataclass
class AssignmentRecord:
    """One step of the trial: which unit went where, and with what probabilities."""

    unit: int
    treatment: int
    probabilities: np.ndarray
    phi: np.ndarray


@dataclass
class TrialState:
    treatments: int
    q: int
    n: int
    lam: np.ndarray
    counts: np.ndarray
    history: list = field(default=None)


def new_trial(treatments: int, q: int, track_history: bool = False) -> TrialState:
    """Fresh state with zero imbalance."""
    if int(treatments) != treatments or treatments < 2:
        raise DomainError(f"need at least 2 arms, got {treatments!r}")
    if int(q) != q or q < 1:
        raise DomainError(f"feature dimension must be >= 1, got {q!r}")
    treatments, q = int(treatments), int(q)
    return TrialState(
        treatments=treatments,
        q=q,
        n=0,
        lam=np.zeros((treatments, q)),
        counts=np.zeros(treatments, dtype=np.int64),
        history=[] if track_history else None,
    )


def _check_phi(state: TrialState, phi_x) -> np.ndarray:
    phi = np.asarray(phi_x, dtype=float)
    if phi.shape != (state.q,):
        raise DomainError(
            f"feature vector has shape {phi.shape}, expected ({state.q},)"
        )
    if not np.all(np.isfinite(phi)):
        raise DomainError("feature vector must be finite")
    return phi


def _potentials(lam: np.ndarray, row: np.ndarray, treatments: int) -> np.ndarray:
    common = float((lam * lam).sum()) + (1.0 - 1.0 / treatments) * float(row @ row)
    return common + 2.0 * (lam @ row)


def potential_imbalances(state: TrialState, phi_x) -> np.ndarray:
    """Total imbalance after hypothetically assigning the next unit to each arm."""
    phi = _check_phi(state, phi_x)
    return _potentials(state.lam, phi, state.treatments)


def allocation_probabilities(potentials, policy: AllocationPolicy) -> np.ndarray:
    """Probability vector for the next assignment given potential imbalances."""
    pot = np.asarray(potentials, dtype=float)
    T = pot.shape[0]
    if isinstance(policy, CompleteRandomization):
        return complete_randomization(T)
    if isinstance(policy, (EfronBiasedCoin, TwoTreatmentContinuous)):
        if T != 2:
            raise DomainError("two-arm allocation rule applied to a multi-arm trial")
        diff = 2.0 * (pot[0] - pot[1])  # two-arm scale
        if isinstance(policy, EfronBiasedCoin):
            p1 = efron_two_treatment(diff, policy.rho)
        else:
            p1 = continuous_two_treatment(diff, policy.cap)
        return np.array([p1, 1.0 - p1])
    if isinstance(policy, PocockSimonRank):
        return pocock_simon_multi(pot, policy.kappa)
    if isinstance(policy, MultiContinuous):
        return continuous_multi(pot - pot.mean(), policy.cap)
    raise DomainError(f"unknown allocation policy {policy!r}")


def _all_small_integers(phi: np.ndarray) -> bool:
    return bool(np.all(phi == np.round(phi)) and np.abs(phi).max(initial=0.0) < 2**20)


def _sample_cumulative(probs, u: float) -> int:
    acc = 0.0
    last = len(probs) - 1
    for k in range(last):
        acc += probs[k]
        if u < acc:
            return k
    return last


def _apply_assignment(state: TrialState, phi: np.ndarray, t: int):
    T = state.treatments
    state.lam -= phi * (1.0 / T)
    state.lam[t] += phi
    state.counts[t] += 1
    state.n += 1


def assign_next(state: TrialState, phi_x, policy: AllocationPolicy, rng) -> int:
    """Draw the next assignment, update the state, and return the arm index."""
    phi = _check_phi(state, phi_x)
    pot = potential_imbalances(state, phi)
    probs = allocation_probabilities(pot, policy)
    t = _sample_cumulative(probs, rng.random())
    if state.history is not None:
        state.history.append(
            AssignmentRecord(unit=state.n, treatment=t, probabilities=probs, phi=phi)
        )
    _apply_assignment(state, phi, t)
    return t


def simulate_assignments(
    phi,
    policy: AllocationPolicy,
    treatments: int,
    rng=None,
    uniforms=None,
) -> np.ndarray:
    """Run a whole trial over a feature matrix and return the assignment vector.

    One uniform draw is consumed per unit, in unit order; ``uniforms`` may be
    supplied directly for replay tests.  Each step evaluates exactly the same
    arithmetic as :func:`assign_next`, so the two paths produce identical
    trajectories on shared draws (complete randomization is vectorized).
    """
    if int(treatments) != treatments or treatments < 2:
        raise DomainError(f"need at least 2 arms, got {treatments!r}")
    T = int(treatments)
    phi = np.ascontiguousarray(np.asarray(phi, dtype=float))
    if phi.ndim != 2:
        raise DomainError("feature matrix must be 2-d")
    if not np.all(np.isfinite(phi)):
        raise DomainError("feature matrix must be finite")
    n = phi.shape[0]
    if uniforms is None:
        uniforms = rng.random(n)
    else:
        uniforms = np.asarray(uniforms, dtype=float)
        if uniforms.shape != (n,):
            raise DomainError("uniforms must have one entry per unit")
    out = np.empty(n, dtype=np.int64)

    if isinstance(policy, CompleteRandomization):
        out[:] = np.minimum((uniforms * T).astype(np.int64), T - 1)
        return out

    if isinstance(policy, (EfronBiasedCoin, TwoTreatmentContinuous)) and T != 2:
        raise DomainError("two-arm allocation rule applied to a multi-arm trial")

    if isinstance(policy, EfronBiasedCoin) and _all_small_integers(phi):
        # With integer features and two arms every quantity below is an exact
        # float, so the sign of the running-difference inner product equals
        # the sign of the potential-imbalance difference bit for bit.
        lam_diff = np.zeros(phi.shape[1])
        rho = policy.rho
        for i in range(n):
            row = phi[i]
            d = float(lam_diff @ row)
            p1 = 0.5 if d == 0.0 else (rho if d < 0.0 else 1.0 - rho)
            if uniforms[i] < p1:
                out[i] = 0
                lam_diff += row
            else:
                out[i] = 1
                lam_diff -= row
        return out
    if isinstance(policy, PocockSimonRank) and len(policy.kappa) != T:
        raise DomainError(
            f"rank probabilities have length {len(policy.kappa)} but trial has {T} arms"
        )
    if not isinstance(
        policy,
        (EfronBiasedCoin, TwoTreatmentContinuous, PocockSimonRank, MultiContinuous),
    ):
        raise DomainError(f"unknown allocation policy {policy!r}")

    lam = np.zeros((T, phi.shape[1]))
    inv_t = 1.0 / T
    for i in range(n):
        row = phi[i]
        probs = allocation_probabilities(_potentials(lam, row, T), policy)
        t = _sample_cumulative(probs, uniforms[i])
        out[i] = t
        lam -= row * inv_t
        lam[t] += row
    return out


def total_imbalance(state_or_lam) -> float:
    """Squared Frobenius norm of the imbalance matrix."""
    lam = state_or_lam.lam if isinstance(state_or_lam, TrialState) else state_or_lam
    lam = np.asarray(lam, dtype=float)
    return float((lam * lam).sum())


class ImbalanceAccumulator:
    """Streaming per-coordinate imbalance sums for long trials.

    Keeps only the T x k matrix of running sums of (arm indicator - 1/T)
    times the tracked covariate values (a leading constant column tracks the
    treatment counts), so metrics are available without retaining history.
    """

    def __init__(self, treatments: int, n_covariates: int):
        if treatments < 2:
            raise DomainError("need at least 2 arms")
        self.treatments = int(treatments)
        self.sums = np.zeros((self.treatments, n_covariates + 1))
        self.sq_totals = np.zeros(n_covariates)
        self.n = 0

    def update(self, treatment: int, covariate_row):
        z = np.asarray(covariate_row, dtype=float)
        if z.shape != (self.sums.shape[1] - 1,):
            raise DomainError("covariate row has the wrong length")
        row = np.concatenate([[1.0], z])
        self.sums -= row / self.treatments
        self.sums[treatment] += row
        self.sq_totals += z * z
        self.n += 1

    def metrics(self, indices=None) -> dict:
        if self.n == 0:
            raise DomainError("no assignments accumulated")
        k = self.sums.shape[1] - 1
        indices = range(k + 1) if indices is None else indices
        scale = 1.0 - 1.0 / self.treatments
        out = {}
        for j in indices:
            s = self.sums[:, j]
            raw = float(s @ s)
            if j == 0:
                out[0] = raw / scale
            else:
                msq = self.sq_totals[j - 1] / self.n
                if msq == 0.0:
                    raise DomainError(f"covariate {j} has zero mean square; metric undefined")
                out[j] = raw / (scale * msq)
        return out


def imbalance_metrics(assignments, covariates, treatments, indices=(0, 1, 2, 3)) -> dict:
    """Normalized post-hoc imbalance metrics.

    Index 0 is the squared norm of per-arm count deviations divided by
    (1 - 1/T); index j >= 1 is the squared norm of per-arm sums of covariate
    j's deviations divided by (1 - 1/T) times the mean square of covariate j.
    For two arms these equal the classical squared sum of +-1 differences,
    normalized by the covariate mean square.
    """
    a = np.asarray(assignments, dtype=np.int64)
    X = np.asarray(covariates, dtype=float)
    if X.ndim != 2 or X.shape[0] != a.shape[0]:
        raise DomainError("covariates must be (n, p) matching the assignments")
    T = int(treatments)
    if a.size == 0:
        raise DomainError("no assignments given")
    if a.min() < 0 or a.max() >= T:
        raise DomainError("assignment index out of range")
    n = a.shape[0]
    dev = np.zeros((n, T))
    dev[np.arange(n), a] = 1.0
    dev -= 1.0 / T
    scale = 1.0 - 1.0 / T
    out = {}
    for j in indices:
        if j == 0:
            s = dev.sum(axis=0)
            out[0] = float((s * s).sum()) / scale
        else:
            if j - 1 >= X.shape[1]:
                raise DomainError(f"covariate index {j} out of range")
            col = X[:, j - 1]
            msq = float((col * col).mean())
            if msq == 0.0:
                raise DomainError(f"covariate {j} has zero mean square; metric undefined")
            s = dev.T @ col
            out[j] = float((s * s).sum()) / (scale * msq)
    return out
