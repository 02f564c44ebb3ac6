"""Poisson log-linear fit, goodness-of-fit statistics and chi-square tails."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

import numpy as np

from bbexact.design import ModelMatrix

STEP_TOL = 1e-10
MAX_ITER = 100
SCORE_TOL = 1e-8
# relative slack when comparing statistics, so that mathematically equal
# values computed along different float paths still count as ties
TIE_RTOL = 1e-9

STATISTICS = ("lr", "pearson")


class NonConvergenceError(RuntimeError):
    """Newton iteration did not settle; ``beta`` holds the last iterate."""

    def __init__(self, message: str, beta: np.ndarray, iterations: int):
        super().__init__(message)
        self.beta = beta
        self.iterations = iterations


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    converged: bool
    iterations: int
    df: int
    lr: float
    pearson: float

    def to_dict(self) -> dict:
        return {
            "beta": self.beta.tolist(),
            "fitted": self.fitted.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "df": self.df,
            "lr": self.lr,
            "pearson": self.pearson,
        }


def as_counts(y, k: int | None = None) -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError("counts must be a 1-d vector")
    if not np.all(arr == np.round(arr)):
        raise ValueError("counts must be integers")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("counts must be nonnegative")
    if k is not None and len(arr) != k:
        raise ValueError(f"expected {k} counts, got {len(arr)}")
    return arr


def log_likelihood(mm: ModelMatrix, y, beta) -> float:
    """Poisson log-likelihood up to the constant ``-sum(log y!)``."""
    eta = mm.entries @ np.asarray(beta, dtype=float)
    return float(np.dot(y, eta) - np.exp(eta).sum())


def score(mm: ModelMatrix, y, beta) -> np.ndarray:
    lam = np.exp(mm.entries @ np.asarray(beta, dtype=float))
    return mm.entries.T @ (np.asarray(y, dtype=float) - lam)


def _newton(mm: ModelMatrix, X: np.ndarray, yf: np.ndarray, total: int):
    beta = np.zeros(X.shape[1])
    beta[0] = math.log(total / len(yf))
    ll = log_likelihood(mm, yf, beta)
    for it in range(1, MAX_ITER + 1):
        lam = np.exp(X @ beta)
        grad = X.T @ (yf - lam)
        hess = X.T @ (X * lam[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise NonConvergenceError("singular information matrix (MLE does not exist)", beta, it) from None
        if not np.all(np.isfinite(step)):
            raise NonConvergenceError("non-finite Newton step (MLE does not exist)", beta, it)
        size = np.max(np.abs(step))
        # the likelihood is concave, so halving always recovers an ascent step
        new = beta + step
        new_ll = log_likelihood(mm, yf, new)
        halvings = 0
        while new_ll < ll - 1e-12 * abs(ll) and halvings < 30:
            step /= 2
            new = beta + step
            new_ll = log_likelihood(mm, yf, new)
            halvings += 1
        beta, ll = new, new_ll
        if size < STEP_TOL:
            break
    else:
        raise NonConvergenceError(
            f"Newton iteration did not converge in {MAX_ITER} steps (MLE may not exist)", beta, MAX_ITER
        )
    return beta, it


def fit(mm: ModelMatrix, y) -> FitResult:
    """Maximum likelihood fit of ``log(lambda) = M beta`` by Newton's method."""
    y = as_counts(y, mm.k)
    total = int(y.sum())
    if total == 0:
        raise ValueError("total count is zero; the model cannot be fitted")
    X = mm.entries.astype(float)
    yf = y.astype(float)
    with np.errstate(over="ignore", invalid="ignore"):
        beta, it = _newton(mm, X, yf, total)
    fitted = np.exp(X @ beta)
    df = mm.k - mm.entries.shape[1]
    return FitResult(
        beta=beta,
        fitted=fitted,
        converged=True,
        iterations=it,
        df=df,
        lr=lr_statistic(y, fitted),
        pearson=pearson_statistic(y, fitted),
    )


def score_residual(mm: ModelMatrix, y, fitted) -> float:
    """Largest ``|M'(lambda - y)|`` component, scaled by the total count."""
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(mm.entries.T @ (np.asarray(fitted) - y))) / max(y.sum(), 1.0))


def _lr_term(c: int, lam: float) -> float:
    return c * math.log(c / lam) if c else 0.0


def _pearson_term(c: int, lam: float) -> float:
    return (c - lam) ** 2 / lam


def lr_statistic(y, fitted) -> float:
    # exact-rounded sum: identical states give identical values in any order
    value = 2.0 * math.fsum(_lr_term(int(c), float(l)) for c, l in zip(y, fitted))
    # only rounding at a perfect fit can push this below zero
    return max(value, 0.0)


def pearson_statistic(y, fitted) -> float:
    return math.fsum(_pearson_term(int(c), float(l)) for c, l in zip(y, fitted))


def statistic(fit_result: FitResult, y, kind: str = "lr") -> float:
    """Goodness-of-fit statistic of ``y`` against the fitted means of ``fit_result``."""
    y = as_counts(y, len(fit_result.fitted))
    if kind == "lr":
        return lr_statistic(y, fit_result.fitted)
    if kind == "pearson":
        return pearson_statistic(y, fit_result.fitted)
    raise ValueError(f"unknown statistic {kind!r}")


class StatisticTable:
    """Memoized per-run statistic terms for repeated evaluation on one fiber."""

    def __init__(self, fitted, kind: str = "lr"):
        if kind not in STATISTICS:
            raise ValueError(f"unknown statistic {kind!r}")
        self.kind = kind
        self.fitted = [float(v) for v in fitted]
        self._term = _lr_term if kind == "lr" else _pearson_term
        self._scale = 2.0 if kind == "lr" else 1.0
        self._cache: list[list[float]] = [[] for _ in self.fitted]

    def _grow(self, i: int, upto: int) -> None:
        col = self._cache[i]
        lam = self.fitted[i]
        col.extend(self._term(c, lam) for c in range(len(col), upto + 1))

    def __call__(self, y) -> float:
        cache = self._cache
        terms = []
        for i, c in enumerate(y):
            col = cache[i]
            if c >= len(col):
                self._grow(i, c + 16)
            terms.append(col[c])
        value = self._scale * math.fsum(terms)
        return max(value, 0.0) if self.kind == "lr" else value


def exceeds(value: float, observed: float) -> bool:
    """Test function ``1(T(y) >= T(y_obs))`` with ties counted as exceedances."""
    return value >= observed - TIE_RTOL * max(1.0, abs(observed))


# -- chi-square upper tail ------------------------------------------------


_EPS = sys.float_info.epsilon
_TINY = sys.float_info.min / _EPS


def _gamma_prefactor(a: float, x: float) -> float:
    return math.exp(a * math.log(x) - x - math.lgamma(a))


def _lower_series(a: float, x: float) -> float:
    # P(a, x) = x^a e^-x / Gamma(a+1) * sum x^n / ((a+1)...(a+n))
    term = total = 1.0 / a
    ap = a
    for _ in range(10000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * _gamma_prefactor(a, x)


def _upper_continued_fraction(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
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
    return h * _gamma_prefactor(a, x)


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma ``Q(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_series(a, x)))
    return min(1.0, max(0.0, _upper_continued_fraction(a, x)))


def chisq_sf(x: float, df: int) -> float:
    """Upper tail ``P(X >= x)`` of the chi-square distribution with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x <= 0:
        return 1.0
    return gammaincc(df / 2.0, x / 2.0)
