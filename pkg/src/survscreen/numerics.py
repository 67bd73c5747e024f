"""Random streams, Gaussian sampling and the special functions behind p-values.

Streams are numpy ``Generator`` objects on top of the counter-based Philox
bit generator.  Each (master_seed, scenario_id, replicate_index) triple is
hashed through ``SeedSequence`` so a replicate's draws never depend on which
worker ran it or in what order.

The distribution tails are computed from the regularized incomplete gamma
and beta functions (series plus Lentz continued fractions).  They are kept
in plain double precision on purpose: p-values smaller than the double range
come back as exactly 0.0, the same way standard statistics software reports
them.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "RngStream",
    "NotPositiveDefiniteError",
    "CholeskyFactor",
    "derive_stream",
    "cholesky",
    "equicorrelation",
    "sample_mvn",
    "std_normal_cdf",
    "std_normal_sf",
    "regularized_gamma_q",
    "regularized_beta",
    "chi_square_sf",
    "student_t_sf",
    "two_sided_t_pvalue",
    "two_sided_normal_pvalue",
]

RngStream = np.random.Generator

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000


def derive_stream(master_seed: int, scenario_id: int, replicate_index: int) -> RngStream:
    """Return the random stream owned by one replicate of one scenario.

    The stream is a pure function of its three keys.  ``SeedSequence`` mixes
    the keys into a 128-bit Philox key, so neighbouring replicates get
    unrelated streams.
    """
    keys = (master_seed, scenario_id, replicate_index)
    if any(int(k) < 0 for k in keys):
        raise ValueError(f"stream keys must be nonnegative, got {keys}")
    seq = np.random.SeedSequence([int(k) for k in keys])
    return np.random.Generator(np.random.Philox(seq))


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not strictly positive."""

    def __init__(self, pivot: int, value: float):
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} has value {value:.6g}"
        )


class CholeskyFactor:
    """Lower-triangular factor ``L`` with ``L @ L.T`` equal to a covariance."""

    __slots__ = ("lower",)

    def __init__(self, lower: np.ndarray):
        self.lower = np.asarray(lower, dtype=float)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def covariance(self) -> np.ndarray:
        return self.lower @ self.lower.T

    def __repr__(self):
        return f"CholeskyFactor(dim={self.dim})"


def cholesky(cov, symmetry_tol: float = 1e-12) -> CholeskyFactor:
    """Cholesky-Banachiewicz factorization of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefiniteError
        If a pivot is not strictly positive.  ``err.pivot`` is the 0-based
        row at which the factorization broke down.
    """
    a = np.array(cov, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"covariance must be square, got shape {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=symmetry_tol):
        raise ValueError("covariance must be symmetric")
    d = a.shape[0]
    lower = np.zeros_like(a)
    for i in range(d):
        for j in range(i + 1):
            s = a[i, j] - lower[i, :j] @ lower[j, :j]
            if i == j:
                if not s > 0.0:
                    raise NotPositiveDefiniteError(i, s)
                lower[i, i] = math.sqrt(s)
            else:
                lower[i, j] = s / lower[j, j]
    return CholeskyFactor(lower)


def equicorrelation(d: int, rho: float) -> np.ndarray:
    """Unit-diagonal ``d x d`` matrix with every off-diagonal entry ``rho``."""
    c = np.full((d, d), float(rho))
    np.fill_diagonal(c, 1.0)
    return c


def sample_mvn(rng: RngStream, factor: CholeskyFactor, n: int) -> np.ndarray:
    """Draw ``n`` zero-mean rows with covariance ``factor.lower @ factor.lower.T``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    z = rng.standard_normal((n, factor.dim))
    return z @ factor.lower.T


# --- special functions -----------------------------------------------------

def std_normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def std_normal_sf(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def _gamma_p_series(a: float, x: float) -> float:
    # P(a, x) by the power series, valid for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ArithmeticError(f"gamma series did not converge (a={a}, x={x})")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_cfrac(a: float, x: float) -> float:
    # Q(a, x) by the Lentz continued fraction, valid for x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ArithmeticError(f"gamma continued fraction did not converge (a={a}, x={x})")
    log_pref = -x + a * math.log(x) - math.lgamma(a)
    if log_pref < -745.0:
        return 0.0
    return math.exp(log_pref) * h


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma ``Q(a, x) = Gamma(a, x) / Gamma(a)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_cfrac(a, x)


def _beta_cfrac(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _stirling_corr(z: float) -> float:
    z2 = z * z
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z


def _log_beta(a: float, b: float) -> float:
    big, small = max(a, b), min(a, b)
    if big < 10.0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    # lgamma(big + small) - lgamma(big) without cancellation
    ratio = (
        small * math.log(big)
        + (big + small - 0.5) * math.log1p(small / big)
        - small
        + _stirling_corr(big + small)
        - _stirling_corr(big)
    )
    return math.lgamma(small) - ratio


def _beta_tail(a: float, b: float, x: float, y: float) -> float:
    # I_x(a, b) with y = 1 - x supplied separately to keep precision near x = 1
    log_x = math.log1p(-y) if y < 0.5 else math.log(x)
    log_y = math.log1p(-x) if x < 0.5 else math.log(y)
    log_pref = a * log_x + b * log_y - _log_beta(a, b)
    if log_pref < -745.0:
        return 0.0
    return math.exp(log_pref) * _beta_cfrac(a, b, x) / a


def regularized_beta(a: float, b: float, x: float, y: float | None = None) -> float:
    """Regularized incomplete beta ``I_x(a, b)``.

    ``y`` may carry ``1 - x`` computed without cancellation.
    """
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if y is None:
        y = 1.0 - x
    if x < 0 or y < 0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0:
        return 0.0
    if y == 0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return _beta_tail(a, b, x, y)
    return 1.0 - _beta_tail(b, a, y, x)


def chi_square_sf(x: float, df: int) -> float:
    """Upper tail probability of the chi-square distribution."""
    if x < 0 or math.isnan(x):
        raise ValueError(f"chi-square statistic must be nonnegative, got {x}")
    if df < 1:
        raise ValueError("df must be a positive integer")
    if x == 0:
        return 1.0
    if df == 1:
        return math.erfc(math.sqrt(0.5 * x))
    if df == 2:
        return math.exp(-0.5 * x)
    return regularized_gamma_q(0.5 * df, 0.5 * x)


def student_t_sf(t: float, df: float) -> float:
    """Upper tail probability ``P(T > t)`` of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isnan(t):
        raise ValueError("t is NaN")
    if t == 0:
        return 0.5
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    t2 = t * t
    # x = df / (df + t^2), 1 - x = t^2 / (df + t^2)
    denom = df + t2
    tail = 0.5 * regularized_beta(0.5 * df, 0.5, df / denom, t2 / denom)
    return tail if t > 0 else 1.0 - tail


def two_sided_t_pvalue(t: float, df: float) -> float:
    return min(1.0, 2.0 * student_t_sf(abs(t), df))


def two_sided_normal_pvalue(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))
