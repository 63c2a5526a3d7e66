"""Run configuration shared by the screeners, the estimator and the CLI."""

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

from .exceptions import ConfigError
from .thresholds import ThresholdSpec, check_alpha

ALGORITHMS = ("basic", "two-stage", "auto")


@dataclass(frozen=True)
class ScreenConfig:
    """Screening parameters.

    ``delta`` sets the moderate-size cap ``floor(n ** (2 - delta))`` on the
    number of predictors screened jointly; ``T`` is the number of random
    partitions used by the two-stage screener.
    """

    alpha: float = 0.5
    delta: float = 0.03
    threshold: str = "auto"
    bootstrap_reps: int = 500
    auto_cutoff_n: int = 200
    algorithm: str = "auto"
    T: int = 10
    seed: Optional[int] = None

    def __post_init__(self):
        check_alpha(self.alpha)
        if not 0.0 < self.delta < 2.0:
            raise ConfigError(f"delta must lie in (0, 2), got {self.delta!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if int(self.T) != self.T or self.T < 1:
            raise ConfigError(f"T must be a positive integer, got {self.T!r}")
        # validates threshold mode and bootstrap size
        self.threshold_spec

    @property
    def threshold_spec(self):
        return ThresholdSpec(self.alpha, self.threshold, self.bootstrap_reps, self.auto_cutoff_n)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)


def moderate_size_cap(n, delta):
    """Largest group size ``floor(n ** (2 - delta))`` screened in one pass."""
    return max(1, math.floor(n ** (2.0 - delta)))


def choose_algorithm(config, n, p):
    """Resolve ``algorithm="auto"``: two-stage iff ``p > n ** (2 - delta)``."""
    if config.algorithm != "auto":
        return config.algorithm
    return "two-stage" if p > n ** (2.0 - config.delta) else "basic"
