"""Least-squares kernels: residuals, adjusted R^2 and slope p-values."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr
from scipy.special import stdtr

from .exceptions import DofError, OverdeterminedError
from .matrix import as_response, check_subset, correlation_scan

RANK_RTOL = 1e-10


@dataclass
class FitResult:
    """Outcome of an intercept-included OLS fit.

    ``rank`` counts the predictor columns kept by the pivoted QR (the
    intercept is not included); ``dof_resid = n - rank - 1``.
    """

    residuals: np.ndarray
    r_squared: float
    adj_r_squared: float
    rank: int
    dof_resid: int

    @property
    def rss(self):
        return float(self.residuals @ self.residuals)

    @property
    def residual_norm(self):
        return math.sqrt(self.rss)


def adjusted_r2(r_squared, n, k):
    """``1 - (1 - R^2) (n - 1) / (n - k - 1)``."""
    if n - k - 1 < 1:
        raise DofError(f"adjusted R^2 needs n - k - 1 >= 1, got n={n}, k={k}")
    return 1.0 - (1.0 - r_squared) * (n - 1) / (n - k - 1)


def resid(Y, X, S):
    """Regress ``Y`` on the columns ``S`` of ``X`` plus an intercept.

    Rank-deficient designs are fit on the independent columns picked by
    column-pivoted QR, so collinear selections are handled without error.
    An empty ``S`` returns the centered response with ``r_squared = 0``.

    Raises
    ------
    OverdeterminedError
        If ``len(S) > n - 2``.
    """
    Y = as_response(Y)
    idx = check_subset(S, X.p)
    n = X.n
    if idx.size > n - 2:
        raise OverdeterminedError(f"{idx.size} predictors exceed the n - 2 = {n - 2} budget")
    yc = np.array(Y.centered)
    tss = Y.centered_norm ** 2
    if idx.size == 0 or tss == 0.0:
        return FitResult(yc, 0.0, 0.0, 0, n - 1)
    A = X.values[:, idx] - X.col_mean[idx]
    Q, R, _ = qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.count_nonzero(d > RANK_RTOL * d[0])) if d[0] > 0 else 0
    Qr = Q[:, :rank]
    res = yc - Qr @ (Qr.T @ yc)
    r2 = min(max(1.0 - float(res @ res) / tss, 0.0), 1.0)
    return FitResult(res, r2, adjusted_r2(r2, n, rank), rank, n - rank - 1)


def _pvalues_from_corr(rho, n):
    rho = np.asarray(rho, dtype=float)
    r2 = np.minimum(rho * rho, 1.0)
    with np.errstate(divide="ignore"):
        t = np.abs(rho) * np.sqrt((n - 2) / (1.0 - r2))
    return 2.0 * stdtr(n - 2, -t)


def simple_slope_pvalue(Y, x):
    """Two-sided t-test p-value for the slope of ``Y ~ 1 + x``.

    A constant ``x`` (or constant ``Y``) returns 1.0.
    """
    y = np.asarray(getattr(Y, "values", Y), dtype=float)
    x = np.asarray(x, dtype=float)
    n = y.size
    if n < 4:
        raise ValueError(f"slope test needs n >= 4, got {n}")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0.0 or syy == 0.0 or np.all(x == x[0]) or np.all(y == y[0]):
        return 1.0
    rho = float(xc @ yc) / math.sqrt(sxx * syy)
    return float(_pvalues_from_corr(rho, n))


def slope_pvalues(Y, X, subset):
    """Vectorized :func:`simple_slope_pvalue` over columns ``subset`` of ``X``."""
    Y = as_response(Y)
    idx = check_subset(subset, X.p)
    if Y.centered_norm == 0.0:
        return np.ones(idx.size)
    return _pvalues_from_corr(correlation_scan(X, Y, idx), X.n)
