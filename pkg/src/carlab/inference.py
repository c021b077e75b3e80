"""Two-arm treatment-effect inference under a linear working model.

The working model regresses the response on (treat, 1 - treat, observed
covariates); the effect estimate is the difference of the two arm
coefficients.  The classical Wald test divides by the usual residual
standard error, which under covariate-adaptive assignment is generally the
wrong scale: the test stays valid but conservative when the design balances
more than the analysis adjusts for.  Adjusted tests replace the residual
variance with a consistent estimator of the true asymptotic variance of the
effect estimate.  Five such estimators are provided:

* ``sigma_tau_reg``: regress working-model residuals on the balancing
  features (requires the features at analysis time).
* ``sigma_tau_bootstrap``: resample units with replacement, re-run the
  randomization procedure on the resampled features, refit (requires the
  features and the procedure).
* ``sigma_tau_mb``: moving-block sample variance of signed residuals.
* ``sigma_tau_mbj``: moving-block jackknife (refit with one block deleted).
* ``sigma_tau_mbb``: moving-block bootstrap (refit on concatenated blocks).

The last three need nothing beyond the working-model data.  All five report
on the same scale: the variance of sqrt(n) * (effect estimate) / 2, so the
adjusted statistic in "direct" mode is sqrt(n) * tau / (2 * sigma), which
for the resampling estimators reduces to tau divided by the estimated
standard deviation of tau.

Linear solves use a Cholesky factorization with a reciprocal-condition
guard at 1e-12; a failing design raises instead of silently switching to a
pseudo-inverse.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from ._normal import normal_quantile, two_sided_p_value
from .engine import simulate_assignments
from .errors import DomainError, EstimatorError, FitError

__all__ = [
    "TrialDataset",
    "FitResult",
    "VarianceEstimate",
    "TestResult",
    "LogisticFit",
    "block_length",
    "lse_fit",
    "t_ls",
    "sigma_tau_reg",
    "sigma_tau_mb",
    "sigma_tau_mbj",
    "sigma_tau_mbb",
    "sigma_tau_bootstrap",
    "adjusted_test",
    "logistic_fit",
    "logistic_wald_test",
]

_RCOND_LIMIT = 1e-12


@dataclass
class TrialDataset:
    """Observed two-arm data: responses, assignments, analysis covariates,
    and (optionally) the balancing feature rows used at randomization."""

    y: np.ndarray
    t: np.ndarray
    x_obs: np.ndarray = None
    phi: np.ndarray = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.t = np.asarray(self.t, dtype=float)
        n = self.y.shape[0]
        if self.y.ndim != 1 or self.t.shape != (n,):
            raise DomainError("y and t must be 1-d arrays of equal length")
        if not np.all((self.t == 0.0) | (self.t == 1.0)):
            raise DomainError("t must be 0/1")
        if self.x_obs is None:
            self.x_obs = np.empty((n, 0))
        else:
            self.x_obs = np.asarray(self.x_obs, dtype=float)
            if self.x_obs.ndim != 2 or self.x_obs.shape[0] != n:
                raise DomainError("x_obs must be an (n, p) matrix")
        if self.phi is not None:
            self.phi = np.asarray(self.phi, dtype=float)
            if self.phi.ndim != 2 or self.phi.shape[0] != n:
                raise DomainError("phi must be an (n, q) matrix")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x_obs.shape[1]


@dataclass
class FitResult:
    theta: np.ndarray
    tau_hat: float
    residuals: np.ndarray
    sigma_e2: float
    gram_inv: np.ndarray
    n: int
    p: int
    n1: int
    n0: int
    treat: np.ndarray


@dataclass
class VarianceEstimate:
    """Estimated variance of sqrt(n) * tau_hat / 2, with method tag and parameters."""

    value: float
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.value >= 0.0):
            raise DomainError(f"variance estimate must be >= 0, got {self.value!r}")


@dataclass
class TestResult:
    statistic: float
    p_value: float
    reject: bool
    method: str
    alpha: float


@dataclass
class LogisticFit:
    coef: np.ndarray
    se: np.ndarray
    wald: np.ndarray
    iterations: int
    deviance: float


def block_length(n: int, rule: str = "sqrt") -> int:
    """Default moving-block length: floor of sqrt(n) or of n**(1/3)."""
    if rule == "sqrt":
        return max(1, int(math.isqrt(int(n))))
    if rule == "cbrt":
        return max(1, int(math.floor(n ** (1.0 / 3.0) + 1e-9)))
    raise DomainError(f"unknown block rule {rule!r}")


def _design(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.column_stack([t, 1.0 - t, x]) if x.shape[1] else np.column_stack([t, 1.0 - t])


def _checked_cho(G: np.ndarray, err_cls, what: str):
    try:
        c, low = sla.cho_factor(G, lower=True)
    except sla.LinAlgError as exc:
        raise err_cls(f"singular {what}") from exc
    inv = sla.cho_solve((c, low), np.eye(G.shape[0]))
    norm_g = np.abs(G).sum(axis=0).max()
    norm_i = np.abs(inv).sum(axis=0).max()
    rcond = 1.0 / (norm_g * norm_i) if norm_g * norm_i > 0 else 0.0
    if rcond < _RCOND_LIMIT:
        raise err_cls(f"ill-conditioned {what} (rcond ~ {rcond:.2e})")
    return (c, low), inv


def lse_fit(data: TrialDataset) -> FitResult:
    """Least-squares fit of the working model.

    With no covariates this reproduces the closed-form two-sample analysis:
    arm means, and the pooled within-arm sum of squares over n - 2.
    """
    y, t, x = data.y, data.t, data.x_obs
    n, p = data.n, data.p
    n1 = int(t.sum())
    n0 = n - n1
    if n1 == 0 or n0 == 0:
        raise FitError("cannot fit: an arm has no observations")
    X = _design(t, x)
    G = X.T @ X
    cho, gram_inv = _checked_cho(G, FitError, "working-model design")
    theta = sla.cho_solve(cho, X.T @ y)
    resid = y - X @ theta
    sse = float(resid @ resid)
    dof = n - p - 2
    if dof > 0:
        sigma_e2 = sse / dof
    elif sse <= 1e-10 * max(1.0, float(y @ y)):
        sigma_e2 = 0.0
    else:
        raise FitError("no residual degrees of freedom")
    return FitResult(
        theta=theta,
        tau_hat=float(theta[0] - theta[1]),
        residuals=resid,
        sigma_e2=sigma_e2,
        gram_inv=gram_inv,
        n=n,
        p=p,
        n1=n1,
        n0=n0,
        treat=t,
    )


def _contrast_gram(gram_inv: np.ndarray) -> float:
    # L (X'X)^-1 L' with L = (1, -1, 0, ..., 0)
    return float(gram_inv[0, 0] + gram_inv[1, 1] - 2.0 * gram_inv[0, 1])


def _gram_statistic(fit: FitResult, scale2: float) -> float:
    # shared by the classical and gram-mode adjusted tests so that equal
    # variance inputs produce bit-identical statistics
    se = math.sqrt(scale2) * math.sqrt(_contrast_gram(fit.gram_inv))
    if se == 0.0:
        if fit.tau_hat != 0.0:
            raise FitError("zero variance scale with a non-zero effect estimate")
        return 0.0
    return fit.tau_hat / se


def t_ls(fit: FitResult, alpha: float = 0.05) -> TestResult:
    """Classical Wald test of equal arm means from the working-model fit."""
    return _wald_result(_gram_statistic(fit, fit.sigma_e2), alpha, "t_ls")


def _wald_result(stat: float, alpha: float, method: str) -> TestResult:
    crit = normal_quantile(1.0 - alpha / 2.0)
    return TestResult(
        statistic=stat,
        p_value=two_sided_p_value(stat),
        reject=bool(abs(stat) >= crit),
        method=method,
        alpha=alpha,
    )


def sigma_tau_reg(fit: FitResult, phi: np.ndarray) -> VarianceEstimate:
    """Regress working-model residuals on the balancing features.

    The feature matrix is used as given (no intercept is added; include a
    constant column when the map carries one).  The estimate is the residual
    sum of squares of that regression over n - p - 2, p being the working
    model's covariate count.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[0] != fit.n:
        raise DomainError("phi must be an (n, q) matrix matching the fit")
    G = phi.T @ phi
    cho, _ = _checked_cho(G, EstimatorError, "feature regression")
    alpha_hat = sla.cho_solve(cho, phi.T @ fit.residuals)
    zeta = fit.residuals - phi @ alpha_hat
    dof = fit.n - fit.p - 2
    if dof <= 0:
        raise EstimatorError("no degrees of freedom for the residual regression")
    return VarianceEstimate(
        value=float(zeta @ zeta) / dof, method="reg", params={"q": phi.shape[1]}
    )


def _check_block(n: int, l: int):
    if int(l) != l or not (1 <= l < n):
        raise DomainError(f"block length must satisfy 1 <= l < n, got l={l!r}, n={n}")


def sigma_tau_mb(fit: FitResult, l: int) -> VarianceEstimate:
    """Moving-block sample variance of the signed residuals.

    Signed residual r_i is +residual for the treated arm, -residual for the
    control arm.  The estimate averages the squared scaled block sums
    (sum over a length-l window / sqrt(l)) over all n - l + 1 windows, with
    a degrees-of-freedom correction in the divisor.  At l = 1 it equals the
    usual residual variance.
    """
    n, p = fit.n, fit.p
    _check_block(n, l)
    divisor = n - l + 1 - (p + 2)
    if divisor <= 0:
        raise DomainError(
            f"block length {l} leaves no degrees of freedom (n={n}, p={p})"
        )
    r = (2.0 * fit.treat - 1.0) * fit.residuals
    c = np.concatenate([[0.0], np.cumsum(r)])
    block_sums = c[l:] - c[: n - l + 1]
    value = float(block_sums @ block_sums) / l / divisor
    return VarianceEstimate(value=value, method="mb", params={"l": int(l)})


def sigma_tau_mbj(data: TrialDataset, l: int) -> VarianceEstimate:
    """Moving-block jackknife: refit with each length-l block deleted.

    The variance of the effect estimate is the sample variance of the
    leave-block-out estimates scaled by (n - l) / l; it is reported on the
    common scale as n times that quantity over 4.
    """
    n, p = data.n, data.p
    _check_block(n, l)
    y, t = data.y, data.t
    D = _design(t, data.x_obs)
    k = D.shape[1]
    m = n - l + 1
    G = D.T @ D
    b = D.T @ y
    outer = np.einsum("ni,nj->nij", D, D)
    P = np.concatenate([np.zeros((1, k, k)), np.cumsum(outer, axis=0)])
    pb = np.concatenate([np.zeros((1, k)), np.cumsum(D * y[:, None], axis=0)])
    G_win = G[None, :, :] - (P[l:] - P[:m])
    b_win = b[None, :] - (pb[l:] - pb[:m])
    ct = np.concatenate([[0.0], np.cumsum(t)])
    n1_win = t.sum() - (ct[l:] - ct[:m])
    n0_win = (n - l) - n1_win
    bad = np.flatnonzero((n1_win == 0) | (n0_win == 0))
    if bad.size:
        raise EstimatorError(
            f"leave-block-out window {int(bad[0])} empties an arm"
        )
    try:
        theta = np.linalg.solve(G_win, b_win[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise EstimatorError("singular design in a leave-block-out window") from exc
    tau = theta[:, 0] - theta[:, 1]
    dev = tau - tau.mean()
    sigma2_jack = float(dev @ dev) / l  # ((n-l)/l) * (1/(n-l)) * sum of squares
    return VarianceEstimate(
        value=n * sigma2_jack / 4.0, method="mbj", params={"l": int(l)}
    )


def _redraw_until_two_arms(draw, check, rng, max_tries: int = 100):
    """Draw index sets, replacing any draw that empties an arm."""
    out = draw(rng)
    for _ in range(max_tries):
        bad = check(out)
        if not bad.size:
            return out
        out[bad] = draw(rng, bad.size)
    raise EstimatorError("resampling kept producing an empty arm")


def sigma_tau_mbb(data: TrialDataset, l: int, B: int, rng) -> VarianceEstimate:
    """Moving-block bootstrap: concatenate resampled blocks, truncate to n, refit.

    Block starts are uniform on the n - l + 1 windows; each resample keeps
    within-block serial structure intact.  Resamples that empty an arm are
    redrawn (up to 100 rounds).  Reported on the common scale as n times the
    bootstrap variance of the effect estimate over 4.
    """
    n = data.n
    _check_block(n, l)
    if B < 2:
        raise DomainError("bootstrap size must be >= 2")
    y, t = data.y, data.t
    D = _design(t, data.x_obs)
    m = n // l
    offs = np.arange(l)

    def draw(rng, rows=B):
        starts = rng.integers(0, n - l + 1, size=(rows, m + 1))
        idx = (starts[:, :, None] + offs[None, None, :]).reshape(rows, (m + 1) * l)
        return idx[:, :n]

    def check(idx):
        counts = t[idx].sum(axis=1)
        return np.flatnonzero((counts == 0) | (counts == idx.shape[1]))

    idx = _redraw_until_two_arms(draw, check, rng)
    Ds = D[idx]
    ys = y[idx]
    G = np.einsum("bni,bnj->bij", Ds, Ds)
    bv = np.einsum("bni,bn->bi", Ds, ys)
    try:
        theta = np.linalg.solve(G, bv[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise EstimatorError("singular design in a block-bootstrap resample") from exc
    tau = theta[:, 0] - theta[:, 1]
    v = float(np.var(tau, ddof=1))
    return VarianceEstimate(
        value=n * v / 4.0, method="mbb", params={"l": int(l), "B": int(B)}
    )


def sigma_tau_bootstrap(
    data: TrialDataset, policy, B: int, rng
) -> VarianceEstimate:
    """Rerandomizing bootstrap: resample units iid, re-run the covariate-adaptive
    procedure on the resampled feature rows, refit the working model.

    Requires ``data.phi`` (the balancing features) and the allocation policy
    used at randomization.  The bootstrap variance of the refitted effect
    estimate, v_B, is reported on the common scale as n * v_B / 4 and kept in
    ``params["v_B"]``; the adjusted statistic in direct mode is then exactly
    tau / sqrt(v_B).
    """
    if data.phi is None:
        raise DomainError("the rerandomizing bootstrap needs the feature matrix")
    if B < 2:
        raise DomainError("bootstrap size must be >= 2")
    n = data.n
    y, x, phi = data.y, data.x_obs, data.phi
    taus = np.empty(B)
    for b in range(B):
        t_star = None
        for _ in range(100):
            I = rng.integers(0, n, size=n)
            assign = simulate_assignments(phi[I], policy, 2, rng)
            treat = (assign == 0).astype(float)
            if 0 < treat.sum() < n:
                t_star = treat
                break
        if t_star is None:
            raise EstimatorError("rerandomization kept producing an empty arm")
        D = _design(t_star, x[I])
        try:
            theta = np.linalg.solve(D.T @ D, D.T @ y[I])
        except np.linalg.LinAlgError as exc:
            raise EstimatorError("singular design in a bootstrap resample") from exc
        taus[b] = theta[0] - theta[1]
    v_B = float(np.var(taus, ddof=1))
    return VarianceEstimate(
        value=n * v_B / 4.0, method="boot", params={"B": int(B), "v_B": v_B}
    )


def adjusted_test(
    fit: FitResult,
    v: VarianceEstimate,
    mode: str = "gram",
    alpha: float = 0.05,
) -> TestResult:
    """Wald test with the residual variance replaced by a consistent estimate.

    ``gram`` mode keeps the design-based contrast variance and swaps in the
    estimated scale; ``direct`` mode uses sqrt(n) * tau / (2 * sigma).  With
    the estimate equal to the residual variance, gram mode reproduces the
    classical test exactly.
    """
    if mode not in ("gram", "direct"):
        raise DomainError(f"unknown mode {mode!r}")
    if v.value == 0.0 and fit.tau_hat != 0.0:
        raise EstimatorError("zero variance estimate with a non-zero effect estimate")
    try:
        if mode == "gram":
            stat = _gram_statistic(fit, v.value)
        elif v.value == 0.0:
            stat = 0.0
        else:
            stat = math.sqrt(fit.n) * fit.tau_hat / (2.0 * math.sqrt(v.value))
    except FitError as exc:
        raise EstimatorError(str(exc)) from exc
    return _wald_result(stat, alpha, f"t_adj_{v.method}")


def logistic_fit(y: np.ndarray, design: np.ndarray, max_iter: int = 50) -> LogisticFit:
    """Logistic regression by iteratively reweighted least squares.

    Convergence is declared when the deviance changes by less than 1e-10.
    Complete separation (diverging coefficients or a degenerate response)
    raises instead of returning a garbage fit.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(design, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DomainError("design must be an (n, k) matrix matching y")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DomainError("responses must be 0/1")
    if y.min() == y.max():
        raise FitError("all responses identical: separation")
    k = X.shape[1]
    beta = np.zeros(k)
    dev_prev = math.inf
    G = None
    for it in range(1, max_iter + 1):
        eta = np.clip(X @ beta, -30.0, 30.0)
        p = 1.0 / (1.0 + np.exp(-eta))
        w = np.clip(p * (1.0 - p), 1e-10, None)
        z = eta + (y - p) / w
        G = X.T @ (w[:, None] * X)
        try:
            beta = np.linalg.solve(G, X.T @ (w * z))
        except np.linalg.LinAlgError as exc:
            raise FitError("singular weighted design: separation or collinearity") from exc
        if np.max(np.abs(beta)) > 30.0:
            raise FitError("diverging coefficients: separation")
        pc = np.clip(p, 1e-12, 1.0 - 1e-12)
        dev = -2.0 * float(y @ np.log(pc) + (1.0 - y) @ np.log(1.0 - pc))
        if abs(dev - dev_prev) < 1e-10:
            cov = np.linalg.inv(G)
            se = np.sqrt(np.diag(cov))
            return LogisticFit(
                coef=beta, se=se, wald=beta / se, iterations=it, deviance=dev
            )
        dev_prev = dev
    raise FitError(f"no convergence in {max_iter} iterations")


def logistic_wald_test(
    y: np.ndarray,
    design: np.ndarray,
    contrast: int = 1,
    alpha: float = 0.05,
    method: str = "t_logi",
) -> TestResult:
    """Wald z-test for one coefficient of a logistic fit.

    With the treatment column coded as (t - 1/2), the tested coefficient is
    the difference of the two arm effects.
    """
    fit = logistic_fit(y, design)
    return _wald_result(float(fit.wald[contrast]), alpha, method)
