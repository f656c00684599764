"""Estimator-style wrapper around :func:`metaround`."""

import numpy as np
from sklearn.base import BaseEstimator

from .engine import MetaroundingConfig, metaround, sample


class MetaRounder(BaseEstimator):
    """Fit a distribution over oracle outputs that is dominated by ``x``.

    Parameters mirror :class:`MetaroundingConfig`. After ``fit(x)`` the
    support lives in ``columns_`` (one row per vector) and the mixing
    weights in ``weights_``.

    >>> from metarounding.setcover import generate, GreedySetCoverOracle
    >>> inst = generate(5, 8, random_state=0)
    >>> mr = MetaRounder(GreedySetCoverOracle(inst), eps=0.2).fit(np.ones(8))
    >>> bool(mr.certified_value_ <= mr.alpha_emp_ + 0.2 + 1e-6)
    True
    """

    def __init__(
        self,
        oracle,
        eps=0.1,
        eta=None,
        max_iterations=None,
        refine=True,
        inner_solver="sqp",
        random_state=None,
    ):
        self.oracle = oracle
        self.eps = eps
        self.eta = eta
        self.max_iterations = max_iterations
        self.refine = refine
        self.inner_solver = inner_solver
        self.random_state = random_state

    def _config(self):
        return MetaroundingConfig(
            eps=self.eps,
            eta=self.eta,
            max_iterations=self.max_iterations,
            refine=self.refine,
            inner_solver=self.inner_solver,
        )

    def fit(self, x, y=None):
        res = metaround(x, self.oracle, self._config())
        self.result_ = res
        self.columns_ = res.columns
        self.weights_ = res.weights
        self.alpha_emp_ = res.alpha_emp
        self.certified_value_ = res.certified_value
        self.gap_trace_ = np.asarray(res.gap_trace)
        self.n_iter_ = res.iterations
        self.n_features_in_ = res.columns.shape[1]
        return self

    def mean_vector(self):
        return self.result_.mean_vector

    def sample(self, size=None, random_state=None):
        rs = self.random_state if random_state is None else random_state
        return sample(self.result_, rs, size=size)
