"""Slow, direct-formula reference implementations used as test oracles."""

import math
from statistics import NormalDist

import numpy as np


def pearson(x, y):
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    if sxx == 0.0:
        return 0.0
    return math.fsum((a - mx) * (b - my) for a, b in zip(x, y)) / math.sqrt(sxx * syy)


def normal_threshold(n, p, alpha):
    tail = 0.5 * (1.0 - (1.0 - alpha) ** (1.0 / p))
    return NormalDist().inv_cdf(1.0 - tail) / math.sqrt(n)


def db_sis(y, A, S, alpha):
    """Members of S with |corr| strictly above the normal threshold for |S|."""
    S = list(S)
    thr = normal_threshold(A.shape[0], len(S), alpha)
    return [j for j in S if abs(pearson(A[:, j], y)) > thr]


def ols_residuals(y, A):
    """Residuals of y on [1, A] via the normal equations."""
    D = np.column_stack([np.ones(len(y)), A])
    beta = np.linalg.solve(D.T @ D, D.T @ y)
    return y - D @ beta


def adj_r2(y, A):
    n = len(y)
    k = A.shape[1]
    r = ols_residuals(y, A) if k else y - y.mean()
    yc = y - y.mean()
    r2 = 1.0 - (r @ r) / (yc @ yc)
    return 1.0 - (1.0 - r2) * (n - 1) / (n - k - 1)
