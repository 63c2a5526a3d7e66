"""Distribution-based screening (DB-SIS) and the iterative basic screener."""

import warnings
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .config import ScreenConfig
from .matrix import ResponseVector, as_matrix, as_response, check_subset, correlation_scan
from .regression import resid
from .thresholds import ThresholdValue, resolve_threshold

STOP_REASONS = ("none", "no_new_predictors", "residual_zero", "overdetermined_guard")

# Y_resid counts as zero below this fraction of the centered response norm
RESIDUAL_RTOL = 1e-10


def _db_sis(Y, X, idx, spec, rng):
    rho = correlation_scan(X, Y, idx)
    thr = resolve_threshold(spec, X, Y, idx, rng)
    keep = np.abs(rho) > thr.value
    return idx[keep], thr, rho[keep]


def db_sis(Y, X, S, spec, rng):
    """Members of ``S`` whose absolute correlation with ``Y`` exceeds the threshold.

    The threshold is resolved for ``len(S)`` candidates; the comparison is
    strict, so ties at the threshold are excluded.

    Returns
    -------
    ndarray of int
        Selected column indices, in the order they appear in ``S``.
    """
    X = as_matrix(X)
    idx = check_subset(S, X.p)
    return _db_sis(as_response(Y), X, idx, spec, rng)[0]


@dataclass
class IterationTrace:
    """Bookkeeping for one pass of the basic screener.

    ``residual_norm`` is the norm of the residual after regressing the
    response on everything selected so far, including this pass.
    """

    iteration: int
    threshold: ThresholdValue
    newly_selected: np.ndarray
    residual_norm: float
    stop_reason: str = "none"

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "threshold": self.threshold.to_dict(),
            "newly_selected": [int(j) for j in self.newly_selected],
            "residual_norm": float(self.residual_norm),
            "stop_reason": self.stop_reason,
        }


@dataclass
class ScreeningResult:
    selected: np.ndarray
    trace: List[IterationTrace] = field(default_factory=list)
    config: ScreenConfig = None

    @property
    def stop_reason(self):
        return self.trace[-1].stop_reason if self.trace else "none"

    def to_dict(self):
        return {
            "selected": [int(j) for j in self.selected],
            "trace": [t.to_dict() for t in self.trace],
            "config": self.config.to_dict() if self.config is not None else None,
        }


def basic_screen(Y, X, config=None, rng=None):
    """Iterative DB-SIS for a moderate number of predictors.

    The first pass screens every column against ``Y``. Each later pass
    regresses ``Y`` on the current selection and screens the remaining
    columns against the residual. The loop ends when a pass adds nothing,
    when the residual vanishes, or when the selection reaches ``n - 2``
    columns and can no longer be fit.

    Parameters
    ----------
    Y : ResponseVector or array-like of shape (n,)
    X : DataMatrix or array-like of shape (n, p)
    config : ScreenConfig, optional
    rng : numpy.random.Generator, optional
        Only consumed by bootstrap thresholds. Defaults to a generator seeded
        from ``config.seed``.

    Returns
    -------
    ScreeningResult
    """
    config = ScreenConfig() if config is None else config
    rng = np.random.default_rng(config.seed) if rng is None else rng
    X = as_matrix(X)
    Y = as_response(Y)
    n, p = X.n, X.p
    if p > n ** (2.0 - config.delta):
        warnings.warn(
            f"p={p} exceeds n^(2-delta)={n ** (2.0 - config.delta):.0f}; "
            "consider the two-stage screener",
            stacklevel=2,
        )
    spec = config.threshold_spec
    tol = RESIDUAL_RTOL * Y.centered_norm
    selected = np.zeros(p, dtype=bool)
    trace = []
    response = Y
    norm = Y.centered_norm
    while True:
        cand = np.flatnonzero(~selected)
        if cand.size == 0:
            trace[-1].stop_reason = "no_new_predictors"
            break
        new, thr, _ = _db_sis(response, X, cand, spec, rng)
        selected[new] = True
        step = IterationTrace(len(trace) + 1, thr, new, norm)
        trace.append(step)
        if new.size == 0:
            step.stop_reason = "no_new_predictors"
            break
        count = int(selected.sum())
        if count <= n - 2:
            fit = resid(Y, X, np.flatnonzero(selected))
            norm = step.residual_norm = fit.residual_norm
        if count >= n - 2:
            step.stop_reason = "overdetermined_guard"
            break
        if norm <= tol:
            step.stop_reason = "residual_zero"
            break
        response = ResponseVector(fit.residuals)
    return ScreeningResult(np.flatnonzero(selected), trace, config)
