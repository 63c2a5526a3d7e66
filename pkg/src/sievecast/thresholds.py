"""Screening thresholds for the maximum absolute null correlation.

Two routes are provided: a closed-form normal approximation and a bootstrap
quantile of ``max_j |corr(Y, x*_j)|`` where each ``x*_j`` is resampled from
its own column independently of the response.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from ._config import parallel_map
from .exceptions import ConfigError, DegenerateResponse
from .matrix import as_response, check_subset

THRESHOLD_MODES = ("auto", "normal", "bootstrap")

# cap on resampled values held per bootstrap block
_BOOT_BLOCK_VALUES = 1 << 20


def check_alpha(alpha):
    if not (isinstance(alpha, (int, float, np.floating)) and 0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha!r}")
    return float(alpha)


@dataclass(frozen=True)
class ThresholdSpec:
    """How to obtain the threshold: level, backend and bootstrap size."""

    alpha: float = 0.5
    mode: str = "auto"
    bootstrap_reps: int = 500
    auto_cutoff_n: int = 200

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.mode not in THRESHOLD_MODES:
            raise ConfigError(f"threshold mode must be one of {THRESHOLD_MODES}, got {self.mode!r}")
        if int(self.bootstrap_reps) != self.bootstrap_reps or self.bootstrap_reps < 50:
            raise ConfigError(f"bootstrap_reps must be an integer >= 50, got {self.bootstrap_reps!r}")
        if self.auto_cutoff_n < 1:
            raise ConfigError("auto_cutoff_n must be positive")


@dataclass(frozen=True)
class ThresholdValue:
    value: float
    method_used: str
    reps_used: Optional[int] = None

    def to_dict(self):
        return {"value": self.value, "method_used": self.method_used, "reps_used": self.reps_used}


def upper_normal_quantile(n_candidates, alpha):
    """``Phi^{-1}(1 - 0.5 * (1 - (1 - alpha)^(1/p)))`` without cancellation.

    The two-sided tail mass ``q = 1 - (1 - alpha)^(1/p)`` is formed with
    ``expm1``/``log1p`` and the quantile is read off the lower tail, which
    keeps full relative precision for p in the millions.
    """
    alpha = check_alpha(alpha)
    if n_candidates < 1:
        raise ConfigError(f"candidate count must be >= 1, got {n_candidates}")
    q = -math.expm1(math.log1p(-alpha) / n_candidates)
    return float(-ndtri(0.5 * q))


def normal_threshold(n, p, alpha):
    """Normal-approximation threshold ``upper_normal_quantile(p, alpha) / sqrt(n)``."""
    if n < 3:
        raise ConfigError(f"sample size must be >= 3, got {n}")
    return ThresholdValue(upper_normal_quantile(p, alpha) / math.sqrt(n), "normal")


def nearest_rank(sample, level):
    """Smallest order statistic whose empirical CDF reaches ``level``."""
    s = np.sort(np.asarray(sample, dtype=float))
    # tolerance keeps e.g. 0.9 * 100 from rounding up to rank 91
    k = max(1, math.ceil(level * s.size - 1e-9))
    return float(s[k - 1])


def null_max_correlations(X, Y, subset, reps, rng):
    """Bootstrap sample of ``max_j |corr(Y, x*_j)|`` over ``subset``.

    Every rep draws from its own seed substream spawned off ``rng``, so the
    returned array is the same for any worker count.
    """
    Y = as_response(Y)
    if Y.centered_norm == 0.0:
        raise DegenerateResponse("response vector is constant")
    idx = check_subset(subset, X.p)
    if idx.size == 0:
        raise ConfigError("bootstrap threshold needs a non-empty predictor subset")
    n = X.n
    u = Y.centered / Y.centered_norm
    cols = np.ascontiguousarray(X.values[:, idx].T)
    step = max(1, _BOOT_BLOCK_VALUES // n)
    seeds = np.random.SeedSequence(int(rng.integers(2**63))).spawn(reps)

    def one_rep(r):
        gen = np.random.default_rng(seeds[r])
        best = 0.0
        for start in range(0, cols.shape[0], step):
            block = cols[start:start + step]
            draws = gen.integers(0, n, size=block.shape)
            xs = np.take_along_axis(block, draws, axis=1)
            xs -= xs.mean(axis=1, keepdims=True)
            norms = np.sqrt(np.einsum("ij,ij->i", xs, xs))
            rho = np.abs(xs @ u) / np.where(norms > 0, norms, np.inf)
            best = max(best, float(rho.max()))
        return min(best, 1.0)

    return np.array(parallel_map(one_rep, range(reps)))


def bootstrap_threshold(X, Y, subset, alpha, reps, rng):
    """Nearest-rank ``(1 - alpha)`` quantile of the bootstrap null maximum."""
    alpha = check_alpha(alpha)
    sample = null_max_correlations(X, Y, subset, reps, rng)
    return ThresholdValue(nearest_rank(sample, 1.0 - alpha), "bootstrap", int(reps))


def resolve_threshold(spec, X, Y, subset, rng):
    """Pick the backend from ``spec`` and compute the threshold for ``subset``.

    ``auto`` bootstraps below ``spec.auto_cutoff_n`` observations and uses the
    normal formula otherwise. The candidate count is ``len(subset)``.
    """
    idx = check_subset(subset, X.p)
    mode = spec.mode
    if mode == "auto":
        mode = "bootstrap" if X.n < spec.auto_cutoff_n else "normal"
    if mode == "normal":
        return normal_threshold(X.n, max(idx.size, 1), spec.alpha)
    return bootstrap_threshold(X, Y, idx, spec.alpha, spec.bootstrap_reps, rng)
