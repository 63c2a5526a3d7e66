"""Distribution-based iterative variable screening for high-dimensional regression."""

from ._config import config_context, get_n_jobs, set_n_jobs
from .config import ScreenConfig, choose_algorithm, moderate_size_cap
from .exceptions import (
    ConfigError,
    DataError,
    DegenerateResponse,
    DofError,
    FormatError,
    OverdeterminedError,
    ParseError,
    SievecastError,
)
from .matrix import (
    DataMatrix,
    ResponseVector,
    correlation_scan,
    load_matrix,
    resample_column,
    save_matrix,
)
from .regression import FitResult, adjusted_r2, resid, simple_slope_pvalue
from .screening import IterationTrace, ScreeningResult, basic_screen, db_sis
from .thresholds import (
    ThresholdSpec,
    ThresholdValue,
    bootstrap_threshold,
    normal_threshold,
    resolve_threshold,
)
from .twostage import (
    IntegrationResult,
    PartitionPlan,
    PartitionRunResult,
    first_stage_run,
    integrate,
    make_partition,
    two_stage_screen,
)

__version__ = "0.1.0"
