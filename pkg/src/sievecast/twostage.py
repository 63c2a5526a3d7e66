"""Random-partition screening for predictor counts beyond ``n ** (2 - delta)``.

First stage: for each of ``T`` random partitions into moderate-size groups,
screen every group against the current residual, let the group whose
selection best explains ``Y`` (adjusted R^2) extend a kernel set, refit and
repeat. Second stage: keep predictors chosen in all ``T`` runs and admit
those chosen less often by a residual slope test, most frequent first.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from ._config import parallel_map
from .config import ScreenConfig, moderate_size_cap
from .exceptions import ConfigError
from .matrix import as_matrix, as_response, correlation_scan
from .regression import resid, slope_pvalues
from .screening import RESIDUAL_RTOL, _db_sis

ADMISSION_LEVEL = 0.05


@dataclass
class PartitionPlan:
    """Disjoint, nearly equal-size groups covering all ``p`` columns."""

    groups: List[np.ndarray]

    @property
    def k(self):
        return len(self.groups)

    @property
    def max_group_size(self):
        return max(len(g) for g in self.groups)

    @property
    def p(self):
        return sum(len(g) for g in self.groups)


def make_partition(p, n, delta, rng):
    """Randomly split ``range(p)`` into ``ceil(p / floor(n ** (2 - delta)))`` groups.

    Group sizes differ by at most one; each group is returned sorted.
    """
    if p < 1 or n < 3:
        raise ConfigError(f"partition needs p >= 1 and n >= 3, got p={p}, n={n}")
    if not 0.0 < delta < 2.0:
        raise ConfigError(f"delta must lie in (0, 2), got {delta!r}")
    k = math.ceil(p / moderate_size_cap(n, delta))
    perm = rng.permutation(p)
    return PartitionPlan([np.sort(g) for g in np.array_split(perm, k)])


@dataclass
class RoundRecord:
    selection_sizes: List[int]
    winner: int
    winning_adj_r2: float
    kernel_size: int

    def to_dict(self):
        return {
            "selection_sizes": self.selection_sizes,
            "winner": self.winner,
            "winning_adj_r2": self.winning_adj_r2,
            "kernel_size": self.kernel_size,
        }


@dataclass
class PartitionRunResult:
    partition_index: int
    selected: np.ndarray
    kernel: np.ndarray
    rounds: List[RoundRecord] = field(default_factory=list)
    stop_reason: str = "none"
    k: int = 1

    def to_dict(self):
        return {
            "partition_index": self.partition_index,
            "k": self.k,
            "selected": [int(j) for j in self.selected],
            "kernel": [int(j) for j in self.kernel],
            "rounds": [r.to_dict() for r in self.rounds],
            "stop_reason": self.stop_reason,
        }


def _fit_budget(kernel, A, rho, budget):
    """Kernel plus the highest-|rho| members of ``A`` that fit in ``budget``."""
    room = budget - kernel.size
    if A.size <= room:
        return A, False
    order = np.lexsort((A, -np.abs(rho)))
    return np.sort(A[order[:max(room, 0)]]), True


def first_stage_run(Y, X, plan, config=None, rng=None, partition_index=1):
    """Kernel-driven screening over one partition.

    Every round screens each group (minus the kernel) against the current
    residual and adds all hits to the selection. The group whose hits
    together with the kernel give the largest adjusted R^2 for the original
    response joins the kernel (lowest group index on ties), and the residual
    is refreshed. Rounds stop when the selection stops growing, the best
    adjusted R^2 fails to increase, the selection exceeds ``n - 2``, the
    winning group has no hits, the residual vanishes, or the winner had to
    be truncated to keep the fit within ``n - 2`` predictors.
    """
    config = ScreenConfig() if config is None else config
    rng = np.random.default_rng(config.seed) if rng is None else rng
    X = as_matrix(X)
    Y = as_response(Y)
    spec = config.threshold_spec
    budget = X.n - 2
    in_kernel = np.zeros(X.p, dtype=bool)
    selected = np.zeros(X.p, dtype=bool)
    kernel = np.empty(0, dtype=np.intp)
    response = Y
    best_prev = None
    rounds = []
    stop = None
    blocks = [X.take(g) for g in plan.groups]
    while stop is None:
        n_before = int(selected.sum())
        cands = []
        for group, block in zip(plan.groups, blocks):
            local = np.flatnonzero(~in_kernel[group])
            if local.size:
                A, _, rho = _db_sis(response, block, local, spec, rng)
                A = group[A]
            else:
                A, rho = local, np.empty(0)
            selected[A] = True
            A_fit, truncated = _fit_budget(kernel, A, rho, budget)
            fit = resid(Y, X, np.concatenate([kernel, A_fit]))
            cands.append((fit.adj_r_squared, A_fit, truncated, A.size))
        adj = [c[0] for c in cands]
        win = int(np.argmax(adj))
        best, A_win, truncated, _ = cands[win]
        kernel = np.sort(np.concatenate([kernel, A_win]))
        in_kernel[A_win] = True
        rounds.append(RoundRecord([c[3] for c in cands], win, float(best), int(kernel.size)))

        if int(selected.sum()) == n_before:
            stop = "no_new_predictors"
        elif best_prev is not None and best <= best_prev:
            stop = "adj_r2_not_increasing"
        elif truncated:
            stop = "overdetermined_guard"
        elif selected.sum() > budget:
            stop = "selection_budget"
        elif A_win.size == 0:
            stop = "kernel_stalled"
        else:
            fit = resid(Y, X, kernel)
            if fit.residual_norm <= RESIDUAL_RTOL * Y.centered_norm:
                stop = "residual_zero"
            response = as_response(fit.residuals)
            best_prev = best
    return PartitionRunResult(
        partition_index, np.flatnonzero(selected), kernel, rounds, stop, plan.k
    )


@dataclass
class IntegrationResult:
    """Vote counts across the partition runs and the integrated selection.

    ``admitted_by_level`` maps an occurrence count to the predictors admitted
    at that level; the top level ``T`` holds the unanimous set.
    """

    psi_counts: Dict[int, int]
    final: np.ndarray
    admitted_by_level: Dict[int, np.ndarray]
    T: int

    def to_dict(self):
        return {
            "T": self.T,
            "final": [int(j) for j in self.final],
            "psi_counts": {str(j): c for j, c in sorted(self.psi_counts.items())},
            "admitted_by_level": {
                str(level): [int(j) for j in adm]
                for level, adm in sorted(self.admitted_by_level.items(), reverse=True)
            },
        }


def integrate(runs, Y, X):
    """Combine ``T >= 2`` partition runs into one selection.

    Predictors picked in all runs are kept outright. Then, for occurrence
    levels ``T - 1`` down to 2, each predictor at that level is admitted if
    its simple-regression slope on the current residual has p < 0.05; the
    residual is refit once per level. Predictors seen once are dropped.
    If the selection would exceed ``n - 2`` predictors, the level's
    admissions are cut by ascending p-value and integration stops.
    """
    T = len(runs)
    if T < 2:
        raise ConfigError(f"integration needs at least 2 runs, got {T}")
    X = as_matrix(X)
    Y = as_response(Y)
    budget = X.n - 2
    counts = np.zeros(X.p, dtype=np.intp)
    for run in runs:
        counts[np.asarray(run.selected, dtype=np.intp)] += 1

    psi = np.flatnonzero(counts == T)
    stopped = False
    if psi.size > budget:
        rho = correlation_scan(X, Y, psi)
        psi = np.sort(psi[np.lexsort((psi, -np.abs(rho)))[:budget]])
        stopped = True
    admitted = {T: psi}
    fit = resid(Y, X, psi)
    for level in range(T - 1, 1, -1):
        if stopped:
            break
        pool = np.flatnonzero(counts == level)
        if pool.size == 0:
            continue
        pv = slope_pvalues(fit.residuals, X, pool)
        keep = pv < ADMISSION_LEVEL
        adm, pv = pool[keep], pv[keep]
        room = budget - psi.size
        if adm.size > room:
            adm = np.sort(adm[np.argsort(pv, kind="stable")[:room]])
            stopped = True
        admitted[level] = adm
        psi = np.union1d(psi, adm)
        fit = resid(Y, X, psi)
    nz = np.flatnonzero(counts)
    return IntegrationResult(
        {int(j): int(counts[j]) for j in nz}, psi.astype(np.intp), admitted, T
    )


@dataclass
class TwoStageResult:
    integration: IntegrationResult
    runs: List[PartitionRunResult]
    config: ScreenConfig = None

    @property
    def selected(self):
        return self.integration.final

    def to_dict(self):
        return {
            "selected": [int(j) for j in self.selected],
            "integration": self.integration.to_dict(),
            "runs": [r.to_dict() for r in self.runs],
            "config": self.config.to_dict() if self.config is not None else None,
        }


def two_stage_screen(Y, X, config=None, rng=None):
    """Run ``config.T`` independent partition runs and integrate them.

    Run ``t`` draws its partition and any bootstrap resamples from its own
    seed substream, so the result is fixed by ``rng`` alone and does not
    depend on how the runs are scheduled.
    """
    config = ScreenConfig() if config is None else config
    rng = np.random.default_rng(config.seed) if rng is None else rng
    if config.T < 2:
        raise ConfigError(f"two-stage screening needs T >= 2, got {config.T}")
    X = as_matrix(X)
    Y = as_response(Y)
    if X.p <= X.n ** (2.0 - config.delta):
        warnings.warn(
            f"p={X.p} is within n^(2-delta); the basic screener applies directly",
            stacklevel=2,
        )
    seeds = np.random.SeedSequence(int(rng.integers(2**63))).spawn(config.T)

    def run(t):
        gen = np.random.default_rng(seeds[t])
        plan = make_partition(X.p, X.n, config.delta, gen)
        return first_stage_run(Y, X, plan, config, gen, partition_index=t + 1)

    runs = parallel_map(run, range(config.T))
    return TwoStageResult(integrate(runs, Y, X), runs, config)
