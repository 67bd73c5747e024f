"""Gaussian and logistic regression with Wald inference.

Both screens fit one small model per feature.  The ``*_screens`` functions fit
all features of a dataset at once by stacking the per-feature designs into a
``(k, n, p)`` array; the single-feature ``*_screen`` functions go through the
plain ``fit_ols`` / ``fit_logistic`` path and give identical numbers.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import two_sided_normal_pvalue, two_sided_t_pvalue

__all__ = [
    "FitResult",
    "RankDeficientError",
    "SingleClassError",
    "fit_ols",
    "fit_logistic",
    "gaussian_screen",
    "gaussian_screens",
    "logistic_screen",
    "logistic_screens",
    "ScreenResult",
]

LOGISTIC_MAX_ITER = 100
LOGISTIC_COEF_TOL = 1e-10
LOGISTIC_LOGLIK_RTOL = 1e-12
# standardized-scale coefficient beyond which a fit is treated as separated
SEPARATION_BOUND = 15.0
_MAX_HALVINGS = 30
# largest |change in eta| for which the log-likelihood gain uses the expm1 form
_SMALL_STEP = 1.0
_DECREMENT_TOL = 1e-8


class RankDeficientError(np.linalg.LinAlgError):
    pass


class SingleClassError(ValueError):
    pass


@dataclass
class FitResult:
    """Coefficients and Wald inference of a fitted regression (intercept first)."""

    coefficients: np.ndarray
    std_errors: np.ndarray
    statistics: np.ndarray
    p_values: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float
    df_resid: int | None = None
    separated: bool = False
    irls_converged: bool = True
    diverging: np.ndarray | None = None
    loglik_history: list = field(default_factory=list, repr=False)


@dataclass
class ScreenResult:
    """Inference for one screened feature."""

    p_value: float
    coefficient: float
    statistic: float
    converged: bool = True


def _check_design(y, X):
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: y {y.shape}, X {X.shape}")
    n, p = X.shape
    if n <= p:
        raise ValueError(f"need more observations than parameters (n={n}, p={p})")
    return y, X


def fit_ols(y, X) -> FitResult:
    """Ordinary least squares with t-based two-sided p-values.

    ``X`` must already contain the intercept column.

    Raises
    ------
    RankDeficientError
        If ``X`` does not have full column rank.
    """
    y, X = _check_design(y, X)
    n, p = X.shape
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise RankDeficientError("design matrix is rank deficient")
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    df = n - p
    rss = float(resid @ resid)
    s2 = rss / df
    r_inv = np.linalg.inv(r)
    se = np.sqrt(s2 * np.sum(r_inv * r_inv, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = coef / se
    pvals = np.array([_t_pvalue(t, df) for t in stat])
    sigma2 = rss / n
    loglik = -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0) if rss > 0 else np.inf
    return FitResult(coef, se, stat, pvals, True, 1, float(loglik), df_resid=df)


def _t_pvalue(t: float, df: int) -> float:
    if np.isnan(t):
        # zero residual variance with a zero coefficient
        return 1.0
    return two_sided_t_pvalue(float(t), df)


def gaussian_screens(time, event, X) -> list[ScreenResult]:
    """Regress log time on ``[1, x_j, event]`` for every column ``j`` of ``X``."""
    y = np.log(np.asarray(time, dtype=float))
    event = np.asarray(event, dtype=float)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    designs = np.empty((k, n, 3))
    designs[:, :, 0] = 1.0
    designs[:, :, 1] = X.T
    designs[:, :, 2] = event
    xtx = np.einsum("kni,knj->kij", designs, designs)
    xty = np.einsum("kni,n->ki", designs, y)
    try:
        xtx_inv = np.linalg.inv(xtx)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError("a screening design is rank deficient") from exc
    coef = np.einsum("kij,kj->ki", xtx_inv, xty)
    resid = y[None, :] - np.einsum("kni,ki->kn", designs, coef)
    df = n - 3
    s2 = np.einsum("kn,kn->k", resid, resid) / df
    se = np.sqrt(s2 * xtx_inv[:, 1, 1])
    stat = coef[:, 1] / se
    return [
        ScreenResult(_t_pvalue(stat[j], df), float(coef[j, 1]), float(stat[j]))
        for j in range(k)
    ]


def gaussian_screen(ds, feature_index: int) -> ScreenResult:
    """Gaussian regression screen of one feature (``feature_index`` is 1-based)."""
    x = _feature(ds, feature_index)
    X = np.column_stack([np.ones(ds.n), x, ds.event])
    fit = fit_ols(np.log(ds.time), X)
    return ScreenResult(float(fit.p_values[1]), float(fit.coefficients[1]), float(fit.statistics[1]))


def _feature(ds, feature_index: int) -> np.ndarray:
    if not 1 <= feature_index <= ds.n_features:
        raise IndexError(f"feature_index must lie in 1..{ds.n_features}")
    return ds.X[:, feature_index - 1]


# --- logistic regression ---------------------------------------------------

def _log1pexp(z):
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _bernoulli_loglik(y, eta):
    # sum y*eta - log(1 + exp(eta)), batched over the leading axis
    return np.sum(y * eta - _log1pexp(eta), axis=-1)


def _expit(z):
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0, e) / (1.0 + e)


def _bernoulli_gain(y, eta, d_eta):
    """``loglik(eta + d_eta) - loglik(eta)`` per row, accurate for small steps.

    ``log1p(exp(a + d)) - log1p(exp(a)) = log1p(expit(a) * expm1(d))`` keeps
    the digits that differencing two full log-likelihoods would cancel.
    """
    small = np.abs(d_eta) <= _SMALL_STEP
    d_small = np.where(small, d_eta, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        direct = _log1pexp(eta + d_eta) - _log1pexp(eta)
    diff = np.where(small, np.log1p(_expit(eta) * np.expm1(d_small)), direct)
    return np.sum(y * d_eta - diff, axis=-1)


def _irls_batch(y, Z, max_iter=LOGISTIC_MAX_ITER):
    """Newton/IRLS for ``k`` logistic models sharing the response ``y``.

    ``Z`` has shape ``(k, n, p)``.  Every accepted step is checked to not
    lower the log-likelihood; a step that would is halved.  The history
    accumulates the per-step gains from ``_bernoulli_gain``; the returned
    ``loglik`` is evaluated directly at the final iterate.
    """
    k, n, p = Z.shape
    beta = np.zeros((k, p))
    eta = np.zeros((k, n))
    loglik = _bernoulli_loglik(y, eta)
    history = [loglik.copy()]
    active = np.ones(k, dtype=bool)
    converged = np.zeros(k, dtype=bool)
    iterations = np.zeros(k, dtype=int)
    for it in range(1, max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        mu = _expit(eta[idx])
        w = mu * (1.0 - mu)
        Zi = Z[idx]
        grad = np.matmul((y - mu)[:, None, :], Zi)[:, 0, :]
        info = np.matmul(Zi.transpose(0, 2, 1) * w[:, None, :], Zi)
        try:
            step = np.linalg.solve(info, grad[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.stack([np.linalg.lstsq(m, g, rcond=None)[0] for m, g in zip(info, grad)])
        old = loglik[idx]
        decrement = np.einsum("ki,ki->k", grad, step)
        scale = np.ones(idx.size)
        eta_i = eta[idx]
        d_eta = np.matmul(Zi, step[..., None])[..., 0]
        gain = _bernoulli_gain(y, eta_i, d_eta)
        for _ in range(_MAX_HALVINGS):
            worse = ~(gain >= 0)
            if not worse.any():
                break
            scale[worse] *= 0.5
            d_eta[worse] *= 0.5
            gain[worse] = _bernoulli_gain(y, eta_i[worse], d_eta[worse])
        stuck = ~(gain >= 0)
        # a step that cannot improve is not taken
        scale[stuck] = 0.0
        d_eta[stuck] = 0.0
        gain[stuck] = 0.0
        new_beta = beta[idx] + scale[:, None] * step
        new_eta = np.matmul(Zi, new_beta[..., None])[..., 0]
        new_ll = old + gain

        delta = np.max(np.abs(new_beta - beta[idx]), axis=1)
        rel = gain / np.maximum(np.abs(old), 1e-300)
        beta[idx] = new_beta
        eta[idx] = new_eta
        loglik[idx] = new_ll
        iterations[idx] = it
        done = (delta < LOGISTIC_COEF_TOL) | (rel < LOGISTIC_LOGLIK_RTOL) | stuck
        converged[idx[done]] = True
        converged[idx[stuck & (decrement >= _DECREMENT_TOL)]] = False
        active[idx[done]] = False
        history.append(loglik.copy())

    mu = _expit(eta)
    w = mu * (1.0 - mu)
    info = np.matmul(Z.transpose(0, 2, 1) * w[:, None, :], Z)
    grad = np.matmul((y - mu)[:, None, :], Z)[:, 0, :]
    loglik = _bernoulli_loglik(y, eta)
    return beta, info, w, grad, loglik, converged, iterations, np.array(history)


def _qr_std_errors(Z, w, col: int) -> np.ndarray:
    """Standard error of coefficient ``col`` for each of ``k`` weighted designs.

    The variance of one coefficient is the reciprocal of the squared last
    diagonal of ``R`` once that column is moved to the end of
    ``sqrt(w) * Z``.  Unlike inverting the information matrix this stays
    accurate when another column is nearly aliased, as happens when the
    follow-up-time coefficient runs off during quasi-separation.
    """
    p = Z.shape[-1]
    order = [c for c in range(p) if c != col] + [col]
    M = np.sqrt(w)[..., None] * Z[..., order]
    r = np.linalg.qr(M, mode="r")
    last = np.abs(r[..., p - 1, p - 1])
    with np.errstate(divide="ignore"):
        return np.where(last > 0, 1.0 / last, np.inf)


def _standardize(X):
    # non-intercept columns to mean 0 / sd 1; returns (Z, center, scale)
    center = X.mean(axis=-2, keepdims=True)
    scale = X.std(axis=-2, keepdims=True)
    center[..., 0] = 0.0
    scale[..., 0] = 1.0
    if np.any(scale == 0):
        raise RankDeficientError("a non-intercept covariate is constant")
    return (X - center) / scale, center[..., 0, :], scale[..., 0, :]


def _unstandardize(beta_std, center, scale):
    beta = beta_std / scale
    beta[..., 0] = beta_std[..., 0] - np.sum(beta[..., 1:] * center[..., 1:], axis=-1)
    return beta


def fit_logistic(y, X, max_iter: int = LOGISTIC_MAX_ITER) -> FitResult:
    """Logistic regression by iteratively reweighted least squares.

    Covariates (every column but the first, which must be the intercept) are
    standardized internally; coefficients and standard errors are reported
    on the original scale, and Wald statistics are unaffected.

    A coefficient is *diverging* when its standardized value exceeds
    ``SEPARATION_BOUND``, which on standardized covariates only happens under
    (quasi-)complete separation.  Such a fit is flagged ``separated`` and
    ``converged=False``.  Wald
    statistics of the last iterate are still reported.

    Raises
    ------
    SingleClassError
        If ``y`` contains only one class.
    """
    y, X = _check_design(y, X)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("y must be binary 0/1")
    if y.min() == y.max():
        raise SingleClassError("response has a single class")
    if not np.allclose(X[:, 0], 1.0):
        raise ValueError("first design column must be the intercept")
    Z, center, scale = _standardize(X[None])
    beta_std, info, w, grad, loglik, conv, iters, history = _irls_batch(y, Z, max_iter)
    se_std = np.array([_qr_std_errors(Z, w, c)[0] for c in range(X.shape[1])])
    return _logistic_result(beta_std[0], info[0], se_std, grad[0], loglik[0], conv[0], iters[0],
                            history[:, 0], center[0], scale[0])


def _diverging(beta_std):
    out = np.abs(beta_std) > SEPARATION_BOUND
    out[..., 0] = False
    return out


def _logistic_result(beta_std, info, se_std, grad, loglik, conv, iters, history, center, scale):
    diverging = _diverging(beta_std)
    separated = bool(diverging.any())
    coef = _unstandardize(beta_std[None].copy(), center[None], scale[None])[0]
    se = se_std / scale
    # the intercept moves with centering; its variance needs the full inverse
    a = np.zeros(len(coef))
    a[0] = 1.0
    a[1:] = -center[1:] / scale[1:]
    try:
        se[0] = np.sqrt(max(float(a @ np.linalg.solve(info, a)), 0.0))
    except np.linalg.LinAlgError:
        se[0] = np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(se > 0, coef / se, 0.0)
    pvals = np.array([two_sided_normal_pvalue(z) for z in stat])
    return FitResult(coef, se, stat, pvals, bool(conv) and not separated, int(iters), float(loglik),
                     separated=separated, irls_converged=bool(conv), diverging=diverging,
                     loglik_history=[float(v) for v in history])


def _screen_usable(irls_converged, diverging_feature, se_feature) -> bool:
    # a diverging nuisance coefficient (follow-up time) leaves the feature test intact
    return bool(irls_converged) and not diverging_feature and bool(np.isfinite(se_feature))


def logistic_screens(time, event, X) -> list[ScreenResult]:
    """Logistic regression of ``event`` on ``[1, x_j, time]`` for every column ``j``.

    A screen is unusable, and reports ``p_value = 1`` and statistic 0, when
    IRLS stops without meeting its convergence test or when the screened
    feature's own coefficient diverges.
    """
    y = np.asarray(event, dtype=float)
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if y.min() == y.max():
        raise SingleClassError("event indicator has a single class")
    designs = np.empty((k, n, 3))
    designs[:, :, 0] = 1.0
    designs[:, :, 1] = X.T
    designs[:, :, 2] = np.asarray(time, dtype=float)
    Z, center, scale = _standardize(designs)
    beta_std, _, w, _, _, conv, _, _ = _irls_batch(y, Z)
    se_std = _qr_std_errors(Z, w, 1)
    stat = beta_std[:, 1] / se_std
    diverging = _diverging(beta_std)
    out = []
    for j in range(k):
        coef = beta_std[j, 1] / scale[j, 1]
        if _screen_usable(conv[j], diverging[j, 1], se_std[j]):
            out.append(ScreenResult(two_sided_normal_pvalue(stat[j]), float(coef), float(stat[j])))
        else:
            out.append(ScreenResult(1.0, float(coef), 0.0, converged=False))
    return out


def logistic_screen(ds, feature_index: int) -> ScreenResult:
    """Logistic regression screen of one feature (``feature_index`` is 1-based)."""
    x = _feature(ds, feature_index)
    X = np.column_stack([np.ones(ds.n), x, ds.time])
    fit = fit_logistic(ds.event, X)
    if not _screen_usable(fit.irls_converged, fit.diverging[1], fit.std_errors[1]):
        return ScreenResult(1.0, float(fit.coefficients[1]), 0.0, converged=False)
    return ScreenResult(float(fit.p_values[1]), float(fit.coefficients[1]), float(fit.statistics[1]))
