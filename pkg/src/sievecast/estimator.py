"""scikit-learn compatible selector wrapping the screening algorithms."""

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._config import config_context
from .config import ScreenConfig, choose_algorithm
from .matrix import DataMatrix, ResponseVector
from .screening import basic_screen
from .twostage import two_stage_screen


def _as_generator(random_state):
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, numbers.Integral):
        return np.random.default_rng(random_state)
    if isinstance(random_state, np.random.RandomState):
        return np.random.default_rng(random_state.randint(2**31))
    raise ValueError(f"cannot build a random generator from {random_state!r}")


class DBSISSelector(SelectorMixin, BaseEstimator):
    """Feature selector based on distribution-based correlation screening.

    A predictor is kept when its absolute correlation with the response (or
    with the residual of the current selection) exceeds the ``1 - alpha``
    quantile of the largest null correlation among the candidates.

    Parameters
    ----------
    alpha : float, default=0.5
        Screening level in (0, 1). Larger values admit more predictors.
    delta : float, default=0.03
        Predictors are screened in groups of at most ``n ** (2 - delta)``.
    threshold : {"auto", "normal", "bootstrap"}, default="auto"
        Threshold backend; ``auto`` bootstraps when ``n < auto_cutoff_n``.
    bootstrap_reps : int, default=500
    auto_cutoff_n : int, default=200
    algorithm : {"auto", "basic", "two-stage"}, default="auto"
        ``auto`` switches to random-partition screening when
        ``p > n ** (2 - delta)``.
    n_partitions : int, default=10
        Number of random partitions for the two-stage algorithm.
    random_state : int, Generator or None, default=None
    n_jobs : int or None, default=None
        Worker threads; results do not depend on this value.

    Attributes
    ----------
    support_ : ndarray of bool of shape (n_features_in_,)
    selected_ : ndarray of int
        Indices of the retained predictors.
    algorithm_ : str
        Algorithm actually run.
    result_ : ScreeningResult or TwoStageResult
        Full trace of the run.

    Examples
    --------
    >>> import numpy as np
    >>> from sievecast.estimator import DBSISSelector
    >>> rng = np.random.default_rng(0)
    >>> X = rng.standard_normal((300, 50))
    >>> y = X[:, 3] - 2 * X[:, 7] + 0.1 * rng.standard_normal(300)
    >>> sel = DBSISSelector(random_state=0).fit(X, y)
    >>> {3, 7} <= set(sel.selected_.tolist())
    True
    """

    def __init__(
        self,
        alpha=0.5,
        delta=0.03,
        threshold="auto",
        bootstrap_reps=500,
        auto_cutoff_n=200,
        algorithm="auto",
        n_partitions=10,
        random_state=None,
        n_jobs=None,
    ):
        self.alpha = alpha
        self.delta = delta
        self.threshold = threshold
        self.bootstrap_reps = bootstrap_reps
        self.auto_cutoff_n = auto_cutoff_n
        self.algorithm = algorithm
        self.n_partitions = n_partitions
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self):
        return ScreenConfig(
            alpha=self.alpha,
            delta=self.delta,
            threshold=self.threshold,
            bootstrap_reps=self.bootstrap_reps,
            auto_cutoff_n=self.auto_cutoff_n,
            algorithm=self.algorithm,
            T=self.n_partitions,
        )

    def fit(self, X, y):
        """Screen the columns of ``X`` against ``y``.

        Returns
        -------
        self
        """
        X, y = validate_data(self, X, y, y_numeric=True, dtype=np.float64, ensure_min_samples=3)
        config = self._config()
        rng = _as_generator(self.random_state)
        data, response = DataMatrix(X), ResponseVector(y)
        self.algorithm_ = choose_algorithm(config, data.n, data.p)
        with config_context(n_jobs=self.n_jobs):
            if self.algorithm_ == "basic":
                self.result_ = basic_screen(response, data, config, rng)
            else:
                self.result_ = two_stage_screen(response, data, config, rng)
        self.selected_ = np.asarray(self.result_.selected, dtype=np.intp)
        support = np.zeros(data.p, dtype=bool)
        support[self.selected_] = True
        self.support_ = support
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.target_tags.required = True
        return tags
