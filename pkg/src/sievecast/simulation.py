"""Synthetic regression designs, accuracy scoring and false-selection theory.

Designs follow the usual screening benchmarks: ``kappa`` active predictors
with coefficients drawn from U[0.5, 1.5], noise variance chosen so the
expected signal fraction equals ``r_star``, and predictors that are i.i.d.,
AR(1)-correlated or block-equicorrelated.
"""

import math
import statistics
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import stats
from scipy.signal import lfilter

from ._config import parallel_map
from .config import ScreenConfig, moderate_size_cap
from .exceptions import ConfigError
from .matrix import DataMatrix, ResponseVector
from .screening import basic_screen
from .thresholds import check_alpha, upper_normal_quantile
from .twostage import two_stage_screen

COV_FAMILIES = ("identity", "ar", "block")
DISTRIBUTIONS = ("gaussian", "student_t", "skew_normal")
METHODS = ("basic", "two-stage")

AR_COEF = 0.75
BLOCK_SIZE = 10
BLOCK_OFF_CORR = 0.05
T_DF = 4
SKEW_LOC, SKEW_SCALE, SKEW_SLANT = 1.0, 1.5, -8.0


@dataclass(frozen=True)
class SimScenario:
    """One data-generating process.

    ``rho1`` is only used by the ``block`` family: the equicorrelation of
    the first ten predictors (the rest share correlation 0.05).
    """

    n: int
    p: int
    cov_family: str = "identity"
    r_star: float = 0.95
    rho1: float = 0.5
    predictor_dist: str = "gaussian"
    kappa: int = 10
    beta_low: float = 0.5
    beta_high: float = 1.5

    def __post_init__(self):
        if self.cov_family not in COV_FAMILIES:
            raise ConfigError(f"cov_family must be one of {COV_FAMILIES}, got {self.cov_family!r}")
        if self.predictor_dist not in DISTRIBUTIONS:
            raise ConfigError(f"predictor_dist must be one of {DISTRIBUTIONS}")
        if self.predictor_dist != "gaussian" and self.cov_family != "identity":
            raise ConfigError("non-gaussian predictors are only generated independently")
        if not 0.0 < self.r_star < 1.0:
            raise ConfigError(f"r_star must lie in (0, 1), got {self.r_star!r}")
        if self.n < 3 or self.p < 1:
            raise ConfigError(f"need n >= 3 and p >= 1, got n={self.n}, p={self.p}")
        if not 1 <= self.kappa <= self.p:
            raise ConfigError(f"kappa must lie in [1, p], got {self.kappa}")
        if not self.beta_low < self.beta_high:
            raise ConfigError("beta_low must be below beta_high")
        if self.cov_family == "block":
            if self.kappa > BLOCK_SIZE:
                raise ConfigError(f"block family supports kappa <= {BLOCK_SIZE}")
            # the shared-factor sampler needs a non-negative equicorrelation
            if not 0.0 <= self.rho1 < 1.0:
                raise ConfigError(f"block rho1 must lie in [0, 1), got {self.rho1!r}")

    @property
    def label(self):
        fam = f"block(rho1={self.rho1:g})" if self.cov_family == "block" else self.cov_family
        return f"{fam}/{self.predictor_dist}/r*={self.r_star:g}/n={self.n}/p={self.p}"

    def to_dict(self):
        d = asdict(self)
        if self.cov_family != "block":
            d["rho1"] = None
        return d


def predictor_variance(dist):
    if dist == "gaussian":
        return 1.0
    if dist == "student_t":
        return T_DF / (T_DF - 2.0)
    d = SKEW_SLANT / math.sqrt(1.0 + SKEW_SLANT**2)
    return SKEW_SCALE**2 * (1.0 - 2.0 * d * d / math.pi)


def expected_signal_variance(s):
    """``E[beta' Sigma beta]`` over the uniform coefficient draw, in closed form."""
    a, b = s.beta_low, s.beta_high
    m1 = 0.5 * (a + b)
    m2 = (b**3 - a**3) / (3.0 * (b - a))
    k = s.kappa
    if s.cov_family == "identity":
        return k * m2 * predictor_variance(s.predictor_dist)
    if s.cov_family == "ar":
        lags = np.arange(1, k)
        off = 2.0 * np.sum((k - lags) * AR_COEF**lags)
        return k * m2 + m1 * m1 * float(off)
    return k * m2 + m1 * m1 * k * (k - 1) * s.rho1


def noise_variance(s):
    return expected_signal_variance(s) * (1.0 - s.r_star) / s.r_star


def sample_predictors(s, rng):
    """Draw the ``n x p`` predictor matrix (column-major) for scenario ``s``."""
    shape = (s.p, s.n)
    if s.predictor_dist == "student_t":
        return rng.standard_t(T_DF, size=shape).T
    if s.predictor_dist == "skew_normal":
        d = SKEW_SLANT / math.sqrt(1.0 + SKEW_SLANT**2)
        z0 = np.abs(rng.standard_normal(shape))
        z1 = rng.standard_normal(shape)
        return (SKEW_LOC + SKEW_SCALE * (d * z0 + math.sqrt(1.0 - d * d) * z1)).T
    z = rng.standard_normal(shape)
    if s.cov_family == "identity":
        return z.T
    if s.cov_family == "ar":
        c = math.sqrt(1.0 - AR_COEF**2)
        # x_0 = z_0 starts the recursion in its stationary law
        z[0] /= c
        return np.ascontiguousarray(lfilter([c], [1.0, -AR_COEF], z, axis=0)).T
    m = min(BLOCK_SIZE, s.p)
    g = rng.standard_normal((2, s.n))
    z[:m] = math.sqrt(s.rho1) * g[0] + math.sqrt(1.0 - s.rho1) * z[:m]
    z[m:] = math.sqrt(BLOCK_OFF_CORR) * g[1] + math.sqrt(1.0 - BLOCK_OFF_CORR) * z[m:]
    return z.T


@dataclass
class SimulatedData:
    X: DataMatrix
    Y: ResponseVector
    truth: np.ndarray
    beta: np.ndarray
    sigma2: float


def generate(scenario, rng):
    """Draw coefficients, predictors and response for one replicate."""
    s = scenario
    beta = np.zeros(s.p)
    beta[: s.kappa] = rng.uniform(s.beta_low, s.beta_high, size=s.kappa)
    x = sample_predictors(s, rng)
    sigma2 = noise_variance(s)
    y = x[:, : s.kappa] @ beta[: s.kappa] + rng.normal(0.0, math.sqrt(sigma2), size=s.n)
    return SimulatedData(DataMatrix(x), ResponseVector(y), np.arange(s.kappa), beta, sigma2)


def accuracy(truth, estimate):
    """Fraction of the true active set recovered by ``estimate``."""
    truth = np.unique(np.asarray(truth, dtype=np.intp))
    if truth.size == 0:
        raise ConfigError("accuracy is undefined for an empty true active set")
    hits = np.intersect1d(truth, np.asarray(estimate, dtype=np.intp))
    return hits.size / truth.size


# -- false-selection theory ---------------------------------------------------


@dataclass
class TheoryReport:
    """False-selection quantities for the normal-approximation threshold.

    ``p1`` is the per-predictor false-selection probability estimated by
    Monte Carlo over ``Z ~ N(0, 1)`` and ``U ~ chi2(n - 2)``; ``p1_exact``
    evaluates the same event through the Beta law of a null squared
    correlation. ``tail_bounds[r] = lambda0**r / r!`` bounds the limiting
    probability of at least ``r`` false selections.
    """

    n: int
    p: int
    alpha: float
    kappa: int
    c_p: float
    threshold: float
    p1: float
    p1_mc_se: float
    mc_reps: int
    p1_exact: float
    expected_false: float
    lambda0: float
    tail_bounds: Dict[int, float]
    poisson_tail: Dict[int, float]
    binomial_tail: Dict[int, float]

    def to_dict(self):
        d = asdict(self)
        for key in ("tail_bounds", "poisson_tail", "binomial_tail"):
            d[key] = {str(r): v for r, v in d[key].items()}
        return d


def _mc_p1(n, thr, reps, rng, chunk=1 << 20):
    hits = 0
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        z = rng.standard_normal(m)
        u = rng.chisquare(n - 2, size=m)
        hits += int(np.count_nonzero(np.abs(z) / np.sqrt(z * z + u) > thr))
        done += m
    return hits / reps


def theory_report(n, p, alpha, kappa=10, mc_reps=100_000, rng=None, max_r=5):
    if n < 4:
        raise ConfigError(f"theory needs n >= 4, got {n}")
    if not 0 <= kappa < p:
        raise ConfigError(f"need 0 <= kappa < p, got kappa={kappa}, p={p}")
    if mc_reps < 1:
        raise ConfigError("mc_reps must be positive")
    alpha = check_alpha(alpha)
    rng = np.random.default_rng() if rng is None else rng
    c_p = upper_normal_quantile(p, alpha)
    thr = c_p / math.sqrt(n)
    p1 = _mc_p1(n, thr, mc_reps, rng)
    se = math.sqrt(p1 * (1.0 - p1) / mc_reps)
    # r^2 ~ Beta(1/2, (n - 2)/2) under independence
    p1_exact = float(stats.beta.sf(min(thr * thr, 1.0), 0.5, 0.5 * (n - 2)))
    lam = -math.log1p(-alpha)
    rs = range(1, max_r + 1)
    return TheoryReport(
        n=n, p=p, alpha=alpha, kappa=kappa, c_p=c_p, threshold=thr,
        p1=p1, p1_mc_se=se, mc_reps=mc_reps, p1_exact=p1_exact,
        expected_false=(p - kappa) * p1_exact, lambda0=lam,
        tail_bounds={r: lam**r / math.factorial(r) for r in rs},
        poisson_tail={r: float(stats.poisson.sf(r - 1, lam)) for r in rs},
        binomial_tail={r: float(stats.binom.sf(r - 1, p - kappa, p1_exact)) for r in rs},
    )


# -- replicate tables ---------------------------------------------------------


@dataclass(frozen=True)
class TableCell:
    """A scenario paired with the screener configuration to run on it."""

    scenario: SimScenario
    method: str = "basic"
    config: ScreenConfig = field(default_factory=ScreenConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")


def screen(method, data, config, rng):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if method == "basic":
            return basic_screen(data.Y, data.X, config, rng).selected
        return two_stage_screen(data.Y, data.X, config, rng).selected


def run_table(cells, reps, seed=0):
    """Mean accuracy and median selection size per cell over ``reps`` replicates.

    Cells that share a scenario are scored on the same simulated datasets:
    replicate ``r`` of scenario ``s`` is generated from the seed substream
    ``(seed, s, r)`` and every configuration for ``s`` is run on it.
    """
    cells = list(cells)
    if not cells:
        raise ConfigError("scenario grid is empty")
    if int(reps) != reps or reps < 1:
        raise ConfigError(f"reps must be a positive integer, got {reps!r}")
    scenarios = list(dict.fromkeys(c.scenario for c in cells))
    by_scenario = {s: [i for i, c in enumerate(cells) if c.scenario == s] for s in scenarios}
    tasks = [(si, r) for si in range(len(scenarios)) for r in range(reps)]

    def run(task):
        si, r = task
        ss = np.random.SeedSequence(seed, spawn_key=(si, r))
        data_ss, *cell_ss = ss.spawn(1 + len(by_scenario[scenarios[si]]))
        data = generate(scenarios[si], np.random.default_rng(data_ss))
        out = {}
        for ci, css in zip(by_scenario[scenarios[si]], cell_ss):
            cell = cells[ci]
            sel = screen(cell.method, data, cell.config, np.random.default_rng(css))
            out[ci] = (accuracy(data.truth, sel), len(sel))
        return out

    results = parallel_map(run, tasks)
    rows = []
    for ci, cell in enumerate(cells):
        accs = [res[ci][0] for res in results if ci in res]
        sizes = [res[ci][1] for res in results if ci in res]
        row = cell.scenario.to_dict()
        row.update(
            method=cell.method,
            alpha=cell.config.alpha,
            T=cell.config.T if cell.method == "two-stage" else None,
            threshold=cell.config.threshold,
            mean_accuracy=statistics.fmean(accs),
            sd_accuracy=statistics.stdev(accs) if len(accs) > 1 else 0.0,
            median_selected=statistics.median(sizes),
            reps=len(accs),
        )
        rows.append(row)
    return rows


# -- presets ------------------------------------------------------------------

# (n, p) pairs used for the moderate-size grids
MODERATE_P = {100: 8700, 200: 34000, 300: 75000, 400: 133000}
PRESETS = ("table1", "table2", "table3", "table-heavy")


def default_moderate_p(n):
    return MODERATE_P.get(n, moderate_size_cap(n, 0.03))


def preset_cells(name, n=None, p=None, T=None, config=None):
    """Scenario grid for a named preset at a configurable scale.

    ``table1``: four covariance designs at two noise levels, basic screener.
    ``table2``: large-p designs, basic and two-stage screeners.
    ``table3``: identity design with alpha in {0.2, 0.35, 0.5, 0.65, 0.8}.
    ``table-heavy``: independent t(4) and skew-normal predictors.
    """
    config = ScreenConfig() if config is None else config
    n = 200 if n is None else n
    if name == "table1":
        p = default_moderate_p(n) if p is None else p
        designs = [
            ("identity", 0.5, (0.91, 0.95)),
            ("ar", 0.5, (0.5, 0.55)),
            ("block", 0.5, (0.5, 0.55)),
            ("block", 0.3, (0.5, 0.55)),
        ]
        return [
            TableCell(SimScenario(n, p, fam, r, rho1), "basic", config)
            for fam, rho1, rs in designs
            for r in rs
        ]
    if name == "table2":
        p = 136_000 if p is None else p
        cfg2 = config.replace(T=config.T if T is None else T)
        designs = [("identity", 0.5, 0.8), ("ar", 0.5, 0.3), ("block", 0.5, 0.3), ("block", 0.3, 0.4)]
        cells = []
        for fam, rho1, r in designs:
            s = SimScenario(n, p, fam, r, rho1)
            cells.append(TableCell(s, "basic", config))
            cells.append(TableCell(s, "two-stage", cfg2))
        return cells
    if name == "table3":
        p = default_moderate_p(n) if p is None else p
        return [
            TableCell(SimScenario(n, p, "identity", r), "basic", config.replace(alpha=a))
            for r in (0.91, 0.95)
            for a in (0.2, 0.35, 0.5, 0.65, 0.8)
        ]
    if name == "table-heavy":
        p = default_moderate_p(n) if p is None else p
        return [
            TableCell(SimScenario(n, p, "identity", r, predictor_dist=d), "basic", config)
            for d in ("student_t", "skew_normal")
            for r in (0.91, 0.95)
        ]
    raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")


TABLE_COLUMNS = [
    "cov_family", "rho1", "predictor_dist", "r_star", "n", "p", "kappa",
    "beta_low", "beta_high", "method", "alpha", "T", "threshold",
    "mean_accuracy", "sd_accuracy", "median_selected", "reps",
]


def table_summary(rows) -> List[Dict[str, Optional[float]]]:
    """Rows restricted to :data:`TABLE_COLUMNS`, in that order."""
    return [{k: row.get(k) for k in TABLE_COLUMNS} for row in rows]
