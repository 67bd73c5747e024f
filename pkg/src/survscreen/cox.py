"""Cox proportional-hazards regression by Newton's method on the partial likelihood.

Times are sorted once in decreasing order, so every risk-set sum becomes a
cumulative sum.  Ties among event times are rejected (the simulator never
produces them); a censored time equal to an event time is kept in that
event's risk set.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linear_models import ScreenResult
from .numerics import chi_square_sf

__all__ = [
    "CoxFit",
    "CoxDataError",
    "SingularInformationError",
    "SurvivalData",
    "log_partial_likelihood",
    "plik_gradient_hessian",
    "fit_cox",
    "univariate_cox_screen",
    "univariate_cox_screens",
    "multivariate_cox_fit",
]

COX_MAX_ITER = 50
COX_TOL = 1e-9
_MAX_HALVINGS = 20
# Newton decrement below which a fit that cannot ascend further is converged
_DECREMENT_TOL = 1e-8
_S0_FLOOR = 1e-280
# largest |change in eta| for which the log-likelihood gain uses the expm1 form
_SMALL_STEP = 1.0


class CoxDataError(ValueError):
    """Input data violates the fitter's contract (no events, ties, constant column)."""


class SingularInformationError(np.linalg.LinAlgError):
    """The observed information matrix cannot be inverted."""


@dataclass
class CoxFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    statistics: np.ndarray
    p_values: np.ndarray
    log_partial_likelihood: float
    iterations: int
    converged: bool
    loglik_history: list = field(default_factory=list, repr=False)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    @property
    def z_scores(self) -> np.ndarray:
        return self.coefficients / self.std_errors


class SurvivalData:
    """Covariates, times and events sorted by decreasing time.

    Build it once and fit as many models on its columns as needed.
    """

    def __init__(self, X, time, event):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        time = np.asarray(time, dtype=float)
        event = np.asarray(event)
        if X.shape[0] != time.shape[0] or time.shape != event.shape:
            raise ValueError("X, time and event must have matching lengths")
        if not np.all((event == 0) | (event == 1)):
            raise CoxDataError("event must be 0/1")
        # decreasing time; censored before events on equal times
        order = np.lexsort((event, -time))
        self.order = order
        self.X = X[order]
        self.time = time[order]
        self.event = event[order].astype(bool)
        self.n_events = int(self.event.sum())
        if self.n_events == 0:
            raise CoxDataError("no events")
        ev_times = self.time[self.event]
        if np.any(ev_times[1:] == ev_times[:-1]):
            raise CoxDataError("tied event times are not supported")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def columns(self, cols) -> "SurvivalData":
        sub = object.__new__(SurvivalData)
        sub.__dict__.update(self.__dict__)
        sub.X = self.X[:, cols]
        if sub.X.ndim == 1:
            sub.X = sub.X[:, None]
        return sub


def _log_risk_sums(eta):
    """log of sum_{j in risk set} exp(eta_j) for every sorted position."""
    shift = eta.max(axis=-1, keepdims=True)
    s0 = np.cumsum(np.exp(eta - shift), axis=-1)
    if np.all(s0 > 0):
        return np.log(s0) + shift
    return np.logaddexp.accumulate(eta, axis=-1)


def _loglik_sorted(data: SurvivalData, beta) -> float:
    return float(_eta_loglik(data.X @ beta, data.event))


def _loglik_gain(eta, d_eta, ev, ll, loglik_at):
    """``l(eta + d_eta) - l(eta)`` along the last axis.

    Differencing two evaluations of the log partial likelihood loses every
    digit once the change drops below the rounding error of the totals,
    which happens well before Newton's method stops improving.  For small
    steps the change is instead formed directly as

        sum_events d_eta_i - log1p(sum_risk w_j expm1(d_eta_j) / sum_risk w_j),

    which is accurate relative to the change itself.  Rows with a larger
    step fall back to ``loglik_at(eta + d_eta) - ll``.
    """
    big = np.max(np.abs(d_eta), axis=-1) > _SMALL_STEP
    small_d = np.where(big[..., None], 0.0, d_eta)
    shift = eta.max(axis=-1, keepdims=True)
    w = np.exp(eta - shift)
    s0 = np.cumsum(w, axis=-1)[..., ev]
    num = np.cumsum(w * np.expm1(small_d), axis=-1)[..., ev]
    gain = np.sum(small_d[..., ev], axis=-1) - np.sum(np.log1p(num / s0), axis=-1)
    if np.any(big):
        gain = np.where(big, loglik_at(eta + d_eta) - ll, gain)
    return gain


def _eta_loglik(eta, ev):
    # rows whose linear predictor overflowed score -inf
    finite = np.all(np.isfinite(eta), axis=-1)
    safe = np.where(finite[..., None], eta, 0.0)
    ll = np.sum((safe - _log_risk_sums(safe))[..., ev], axis=-1)
    return np.where(finite, ll, -np.inf)


def _derivatives_sorted(data: SurvivalData, beta):
    """Log partial likelihood, score and negative Hessian in one pass.

    The risk-set second moments are never formed per event: subject ``j``
    belongs to the risk set of every event at or after its sorted position,
    so ``sum_i S2_i / S0_i = X' diag(w * c) X`` with ``c`` the reverse
    cumulative sum of ``1 / S0`` over events.
    """
    eta = data.X @ beta
    shift = eta.max()
    w = np.exp(eta - shift)
    X = data.X
    s0 = np.cumsum(w)
    ev = data.event
    # 1/S0 must stay finite and normal for the Hessian
    if not np.all(s0[ev] > _S0_FLOOR):
        raise FloatingPointError("risk-set sum underflowed")
    s0e = s0[ev]
    loglik = float(np.sum(eta[ev] - (np.log(s0e) + shift)))
    mean = np.cumsum(w[:, None] * X, axis=0)[ev] / s0e[:, None]
    grad = X[ev].sum(axis=0) - mean.sum(axis=0)
    inv_s0 = np.zeros_like(s0)
    inv_s0[ev] = 1.0 / s0e
    c = np.cumsum(inv_s0[::-1])[::-1]
    neg_hess = (X * (w * c)[:, None]).T @ X - mean.T @ mean
    return loglik, grad, 0.5 * (neg_hess + neg_hess.T)


def log_partial_likelihood(beta, X, time, event) -> float:
    """Breslow log partial likelihood."""
    data = SurvivalData(X, time, event)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    return _loglik_sorted(data, beta)


def plik_gradient_hessian(beta, X, time, event):
    """Score vector and negative Hessian of the Breslow log partial likelihood."""
    data = SurvivalData(X, time, event)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    _, grad, neg_hess = _derivatives_sorted(data, beta)
    return grad, neg_hess


def _check_columns(X):
    if np.any(np.ptp(X, axis=0) == 0):
        raise CoxDataError("constant covariate column")


def _newton(data: SurvivalData, max_iter: int, tol: float):
    p = data.X.shape[1]
    ev = data.event
    beta = np.zeros(p)
    loglik, grad, neg_hess = _derivatives_sorted(data, beta)
    eta = np.zeros(data.n)
    history = [loglik]
    converged = False
    it = 0

    def loglik_at(e):
        return _eta_loglik(e, ev)

    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(neg_hess, grad)
        except np.linalg.LinAlgError as exc:
            raise SingularInformationError("information matrix is singular") from exc
        decrement = float(grad @ step)
        d_eta = data.X @ step
        gain = _loglik_gain(eta, d_eta, ev, loglik, loglik_at)
        for _ in range(_MAX_HALVINGS):
            if gain >= 0:
                break
            step = 0.5 * step
            d_eta = 0.5 * d_eta
            gain = _loglik_gain(eta, d_eta, ev, loglik, loglik_at)
        if not gain >= 0:
            # no ascent left at double precision
            converged = decrement < _DECREMENT_TOL
            break
        new_beta = beta + step
        try:
            loglik_new, grad_new, hess_new = _derivatives_sorted(data, new_beta)
        except FloatingPointError:
            # coefficients running off to infinity (monotone likelihood)
            break
        beta, loglik, grad, neg_hess = new_beta, loglik_new, grad_new, hess_new
        eta = data.X @ beta
        history.append(history[-1] + float(gain))
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    return beta, loglik, neg_hess, it, converged, history


def _wald(beta, neg_hess):
    try:
        chol = np.linalg.cholesky(neg_hess)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError("information matrix is not positive definite") from exc
    inv_chol = np.linalg.inv(chol)
    cov = inv_chol.T @ inv_chol
    if not (np.all(np.isfinite(cov)) and np.all(np.diag(cov) > 0)):
        raise SingularInformationError("information matrix is numerically singular")
    stat = beta**2 / np.diag(cov)
    pvals = np.array([chi_square_sf(float(s), 1) for s in stat])
    return cov, stat, pvals


def _fit_sorted(data: SurvivalData, max_iter=COX_MAX_ITER, tol=COX_TOL) -> CoxFit:
    _check_columns(data.X)
    beta, loglik, neg_hess, it, converged, history = _newton(data, max_iter, tol)
    cov, stat, pvals = _wald(beta, neg_hess)
    return CoxFit(beta, cov, stat, pvals, loglik, it, bool(converged), history)


def fit_cox(X, time, event, max_iter: int = COX_MAX_ITER, tol: float = COX_TOL) -> CoxFit:
    """Fit a Cox model by damped Newton iterations from ``beta = 0``.

    A Newton step that lowers the log partial likelihood is halved (up to 20
    times).  Iteration stops once the largest coefficient change is below
    ``tol``.  Wald chi-square statistics use the inverse negative Hessian at
    the final iterate; when ``max_iter`` is exhausted the result is returned
    with ``converged=False``.

    Raises
    ------
    CoxDataError
        No events, tied event times, or a constant column.
    SingularInformationError
        Collinear covariates.
    """
    return _fit_sorted(SurvivalData(X, time, event), max_iter, tol)


def univariate_cox_screen(ds, feature_index: int) -> ScreenResult:
    """Univariate Cox fit of one feature (``feature_index`` is 1-based)."""
    if not 1 <= feature_index <= ds.n_features:
        raise IndexError(f"feature_index must lie in 1..{ds.n_features}")
    fit = fit_cox(ds.X[:, [feature_index - 1]], ds.time, ds.event)
    return _screen_from_fit(fit, 0)


def _screen_from_fit(fit: CoxFit, j: int) -> ScreenResult:
    if not fit.converged:
        return ScreenResult(1.0, float(fit.coefficients[j]), 0.0, converged=False)
    return ScreenResult(float(fit.p_values[j]), float(fit.coefficients[j]), float(fit.statistics[j]))


def univariate_cox_screens(data: SurvivalData, max_iter: int = COX_MAX_ITER,
                           tol: float = COX_TOL) -> list[ScreenResult]:
    """One single-covariate Cox fit per column of ``data``, run side by side.

    Follows the same damped Newton recursion as ``fit_cox`` on each column.
    """
    X = data.X.T  # (k, n)
    if np.any(np.ptp(X, axis=1) == 0):
        raise CoxDataError("constant covariate column")
    ev = data.event
    k = X.shape[0]
    X_ev_sum = X[:, ev].sum(axis=1)

    def derivs(beta):
        eta = beta[:, None] * X
        shift = eta.max(axis=1, keepdims=True)
        w = np.exp(eta - shift)
        s0_all = np.cumsum(w, axis=1)
        s0 = s0_all[:, ev]
        mean = np.cumsum(w * X, axis=1)[:, ev] / s0
        ll = np.sum(eta[:, ev] - (np.log(s0) + shift), axis=1)
        grad = X_ev_sum - mean.sum(axis=1)
        inv_s0 = np.where(ev, 1.0 / s0_all, 0.0)
        c = np.cumsum(inv_s0[:, ::-1], axis=1)[:, ::-1]
        info = np.einsum("kn,kn->k", w * c, X * X) - np.einsum("kd,kd->k", mean, mean)
        return ll, grad, info

    def gain_of(beta, step, ll, rows):
        eta = beta[rows, None] * X[rows]
        d_eta = step[rows, None] * X[rows]
        return _loglik_gain(eta, d_eta, ev, ll[rows], lambda e: _eta_loglik(e, ev))

    beta = np.zeros(k)
    ll, grad, info = derivs(beta)
    active = np.ones(k, dtype=bool)
    converged = np.zeros(k, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        step = np.where(active, grad / info, 0.0)
        decrement = grad * step
        gain = np.zeros(k)
        gain[active] = gain_of(beta, step, ll, active)
        for _ in range(_MAX_HALVINGS):
            worse = active & ~(gain >= 0)
            if not worse.any():
                break
            step[worse] *= 0.5
            gain[worse] = gain_of(beta, step, ll, worse)
        stuck = active & ~(gain >= 0)
        converged[stuck] = decrement[stuck] < _DECREMENT_TOL
        active &= ~stuck
        beta = np.where(active, beta + step, beta)
        ll, grad, info = derivs(beta)
        done = active & (np.abs(step) < tol)
        converged[done] = True
        active &= ~done

    out = []
    for j in range(k):
        if not converged[j] or not info[j] > 0:
            out.append(ScreenResult(1.0, float(beta[j]), 0.0, converged=False))
            continue
        stat = beta[j] ** 2 * info[j]
        out.append(ScreenResult(chi_square_sf(float(stat), 1), float(beta[j]), float(stat)))
    return out


def multivariate_cox_fit(ds, columns) -> CoxFit:
    """Joint Cox fit on ``columns`` (1-based feature indices) of a dataset."""
    cols = [int(c) for c in columns]
    if not cols:
        raise ValueError("columns must be nonempty")
    if len(set(cols)) != len(cols):
        raise SingularInformationError(f"duplicated columns {cols} make the information singular")
    if min(cols) < 1 or max(cols) > ds.n_features:
        raise IndexError(f"columns must lie in 1..{ds.n_features}")
    return fit_cox(ds.X[:, [c - 1 for c in cols]], ds.time, ds.event)
