"""Schoenfeld residuals and the Grambsch-Therneau proportional-hazards test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cox import CoxFit, SurvivalData
from .numerics import chi_square_sf

__all__ = ["PhTestFailure", "PhTestResult", "schoenfeld_residuals", "event_times", "ph_test"]

TRANSFORMS = ("km", "rank", "identity")
MIN_EVENTS = 10


class PhTestFailure(ArithmeticError):
    """The PH test could not be computed (singular or degenerate scaled residuals)."""


@dataclass
class PhTestResult:
    per_covariate_chisq: np.ndarray
    per_covariate_p: np.ndarray
    global_chisq: float
    global_p: float
    transform: str
    n_events: int


def _residuals_sorted(data: SurvivalData, beta) -> np.ndarray:
    eta = data.X @ beta
    w = np.exp(eta - eta.max())
    s0 = np.cumsum(w)
    s1 = np.cumsum(w[:, None] * data.X, axis=0)
    ev = data.event
    # sorted by decreasing time; flip so rows run in increasing event time
    return (data.X[ev] - s1[ev] / s0[ev][:, None])[::-1]


def schoenfeld_residuals(fit: CoxFit, X, time, event) -> np.ndarray:
    """Unscaled Schoenfeld residuals, one row per event in increasing time order."""
    data = SurvivalData(X, time, event)
    if data.X.shape[1] != len(fit.coefficients):
        raise ValueError("fit and X disagree on the number of covariates")
    return _residuals_sorted(data, np.asarray(fit.coefficients, dtype=float))


def event_times(time, event) -> np.ndarray:
    time = np.asarray(time, dtype=float)
    return np.sort(time[np.asarray(event) == 1])


def _km_left(data: SurvivalData) -> np.ndarray:
    # Kaplan-Meier just before each event time, increasing time order
    at_risk = np.arange(1, data.n + 1)[data.event][::-1]
    surv_after = np.cumprod(1.0 - 1.0 / at_risk)
    return np.concatenate([[1.0], surv_after[:-1]])


def _transform(data: SurvivalData, transform: str) -> np.ndarray:
    if transform == "km":
        return _km_left(data)
    if transform == "rank":
        return np.arange(1.0, data.n_events + 1)
    if transform == "identity":
        return data.time[data.event][::-1].copy()
    raise ValueError(f"transform must be one of {TRANSFORMS}, got {transform!r}")


def ph_test(fit: CoxFit, X, time, event, transform: str = "km") -> PhTestResult:
    """Score test of proportional hazards against a linear trend in ``g(t)``.

    Scaled residuals are the unscaled Schoenfeld residuals times
    ``n_events * fit.covariance``.  Per-covariate statistics are

        (sum_k (g_k - mean g) r*_kj)^2 / (n_events * V_jj * sum_k (g_k - mean g)^2)

    and the global statistic is ``U' V U * n_events / sum (g - mean g)^2``
    with ``U`` the g-weighted sum of unscaled residuals, on ``p`` degrees of
    freedom.

    Raises
    ------
    PhTestFailure
        Non-converged fit, constant covariate, degenerate transform or a
        covariance that is not positive definite.
    """
    if transform not in TRANSFORMS:
        raise ValueError(f"transform must be one of {TRANSFORMS}, got {transform!r}")
    if not fit.converged:
        raise PhTestFailure("Cox fit did not converge")
    data = SurvivalData(X, time, event)
    return _ph_test_sorted(fit, data, transform)


def _ph_test_sorted(fit: CoxFit, data: SurvivalData, transform: str = "km") -> PhTestResult:
    if data.n_events < MIN_EVENTS:
        raise ValueError(f"need at least {MIN_EVENTS} events, got {data.n_events}")
    if np.any(np.ptp(data.X, axis=0) == 0):
        raise PhTestFailure("constant covariate has zero-variance residuals")
    cov = np.asarray(fit.covariance, dtype=float)
    p = cov.shape[0]
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise PhTestFailure("fit covariance is not positive definite") from exc

    resid = _residuals_sorted(data, np.asarray(fit.coefficients, dtype=float))
    d = data.n_events
    g = _transform(data, transform)
    g = g - g.mean()
    ss = float(g @ g)
    if not ss > 0:
        raise PhTestFailure("transformed event times have no spread")

    scaled = resid @ cov * d
    test = g @ scaled
    chisq = test**2 / (np.diag(cov) * d * ss)
    u = g @ resid
    global_chisq = float(u @ cov @ u) * d / ss
    if not (np.all(np.isfinite(chisq)) and np.isfinite(global_chisq)):
        raise PhTestFailure("non-finite PH statistic")
    pvals = np.array([chi_square_sf(float(c), 1) for c in chisq])
    return PhTestResult(chisq, pvals, global_chisq, chi_square_sf(global_chisq, p), transform, d)
