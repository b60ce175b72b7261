"""scikit-learn compatible wrappers.

Rows of ``X`` are parameter points ``(gamma*tau, alpha)``; the estimators
map them to first-detection observables so the simulator can be dropped
into pipelines, ``GridSearchCV``-style sweeps or ``clone``-based tooling.
There is nothing to learn: ``fit`` only validates input and records the
feature count.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .detection import DetectionSetup, Protocol, basis_state, first_detection, normalize
from .model import ModelParams
from .montecarlo import DEFAULT_SHOTS, sample

OBSERVABLE_COLUMNS = ("mean_n", "p_det", "survival")


def check_parameter_array(X) -> np.ndarray:
    """Validate an ``(n_samples, 2)`` array of ``(gtau, alpha)`` rows."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 columns (gtau, alpha), got {X.shape[1]}")
    if np.any(X[:, 0] < 0):
        raise ValueError("gtau must be non-negative")
    return X


def _resolve_initial(initial, target: int, dim: int) -> np.ndarray:
    if initial is None:
        return basis_state(target, dim)
    if np.isscalar(initial):
        return basis_state(int(initial), dim)
    return normalize(initial)


class FirstDetectionEstimator(TransformerMixin, BaseEstimator):
    """Exact first-detection observables for each parameter row.

    Parameters
    ----------
    protocol : {"onsite", "tracking"}
    N : int
        Number of measurements.
    target : int
        Detected site.
    initial : None, int or array-like
        Initial state; None means the return problem, an int a site.
    observable : {"mean_n", "p_det", "survival"}
        Column returned by :meth:`predict`.
    gamma : float
        Hopping amplitude used to split ``gtau`` into ``gamma`` and ``tau``.

    ``transform`` returns all three observables; an undefined conditional
    mean is reported as NaN.
    """

    def __init__(self, protocol="onsite", N=20, target=0, initial=None, observable="mean_n", gamma=1.0):
        self.protocol = protocol
        self.N = N
        self.target = target
        self.initial = initial
        self.observable = observable
        self.gamma = gamma

    def _validate_params(self):
        Protocol.parse(self.protocol)
        if self.observable not in OBSERVABLE_COLUMNS:
            raise ValueError(f"observable must be one of {OBSERVABLE_COLUMNS}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")

    def fit(self, X, y=None):
        self._validate_params()
        X = check_parameter_array(X)
        self.n_features_in_ = X.shape[1]
        self.initial_ = _resolve_initial(self.initial, self.target, 3)
        return self

    def _row(self, gtau, alpha):
        params = ModelParams.from_gtau(gtau, alpha, self.gamma)
        dist = first_detection(DetectionSetup(params, self.protocol, self.initial_, self.target, self.N))
        mean = np.nan if dist.mean_n is None else dist.mean_n
        return mean, dist.p_det, float(dist.survival[-1])

    def transform(self, X):
        check_is_fitted(self, "initial_")
        X = check_parameter_array(X)
        return np.array([self._row(g, a) for g, a in X], dtype=float).reshape(-1, 3)

    def predict(self, X):
        return self.transform(X)[:, OBSERVABLE_COLUMNS.index(self.observable)]

    def get_feature_names_out(self, input_features=None):
        return np.asarray(OBSERVABLE_COLUMNS, dtype=object)


class TrajectorySampler(TransformerMixin, BaseEstimator):
    """Shot-sampled counterpart of :class:`FirstDetectionEstimator`.

    ``transform`` returns ``(sample_mean_n, stderr, sample_p_det)`` per
    row.  Row ``i`` is sampled with seed ``seed + i`` so results do not
    depend on batch composition beyond row order.
    """

    def __init__(self, protocol="onsite", N=20, target=0, initial=None, shots=DEFAULT_SHOTS, seed=0,
                 n_jobs=1, gamma=1.0):
        self.protocol = protocol
        self.N = N
        self.target = target
        self.initial = initial
        self.shots = shots
        self.seed = seed
        self.n_jobs = n_jobs
        self.gamma = gamma

    def fit(self, X, y=None):
        Protocol.parse(self.protocol)
        if self.shots < 1:
            raise ValueError("shots must be positive")
        X = check_parameter_array(X)
        self.n_features_in_ = X.shape[1]
        self.initial_ = _resolve_initial(self.initial, self.target, 3)
        return self

    def sample_row(self, gtau, alpha, row=0):
        params = ModelParams.from_gtau(gtau, alpha, self.gamma)
        setup = DetectionSetup(params, self.protocol, self.initial_, self.target, self.N)
        return sample(setup, self.shots, self.seed + row, self.n_jobs)

    def transform(self, X):
        check_is_fitted(self, "initial_")
        X = check_parameter_array(X)
        out = np.empty((X.shape[0], 3))
        for i, (g, a) in enumerate(X):
            ens = self.sample_row(g, a, i)
            m = ens.sample_mean_n
            out[i] = (np.nan if m is None else m, ens.sample_mean_stderr, ens.sample_p_det)
        return out

    def predict(self, X):
        return self.transform(X)[:, 0]

    def get_feature_names_out(self, input_features=None):
        return np.asarray(("sample_mean_n", "stderr", "sample_p_det"), dtype=object)
