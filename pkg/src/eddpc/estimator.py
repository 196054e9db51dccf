"""scikit-learn style wrappers: fit on recorded data, predict the next input."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InputError
from .ocp import OcpSpec, assemble, recover_trajectory
from .predictors import build_predictor
from .qp import OPTIMAL, ActiveSetSolver
from .trajectory import Trajectory, canonical_scheme


def _as_trajectory(X, m: int) -> Trajectory:
    X = check_array(X, ensure_min_samples=2)
    if not 0 < m < X.shape[1]:
        raise InputError(f"m = {m} does not split {X.shape[1]} columns into inputs and outputs")
    return Trajectory(X, m)


class TrajectoryPredictor(TransformerMixin, BaseEstimator):
    """Builds a scheme's predictor from a ``(T, q)`` data array.

    ``transform`` maps stacked length-``L + n`` windows to regressor coordinates
    (least squares), ``inverse_transform`` maps regressors back to windows.
    ``lag`` defaults to its upper bound ``n``.
    """

    def __init__(self, scheme="eDDPC", n=1, L=2, m=1, lag=None, T_ini=None, kappa_max=1e4):
        self.scheme = scheme
        self.n = n
        self.L = L
        self.m = m
        self.lag = lag
        self.T_ini = T_ini
        self.kappa_max = kappa_max

    def fit(self, X, y=None):
        traj = _as_trajectory(X, self.m)
        lag = self.n if self.lag is None else self.lag
        self.predictor_ = build_predictor(canonical_scheme(self.scheme), traj, self.L, self.n,
                                          lag=lag, T_ini=self.T_ini, kappa_max=self.kappa_max)
        self.map_ = self.predictor_.trajectory_map()
        self.n_features_in_ = traj.q
        return self

    def transform(self, X):
        check_is_fitted(self, "map_")
        X = check_array(X)
        if X.shape[1] != self.map_.shape[0]:
            raise InputError(f"expected windows of length {self.map_.shape[0]}, got {X.shape[1]}")
        return np.linalg.lstsq(self.map_, X.T, rcond=None)[0].T

    def inverse_transform(self, X):
        check_is_fitted(self, "map_")
        X = check_array(X)
        return X @ self.map_.T


class PredictiveController(BaseEstimator):
    """Receding-horizon controller; ``predict`` returns the first optimal input.

    ``fit`` takes a ``(T, q)`` array of input/output data. ``predict`` takes a
    single ``(n, q)`` past window or a batch ``(k, n * q)`` of flattened windows.
    """

    def __init__(self, scheme="eDDPC", n=1, L=2, m=1, lag=None, T_ini=None, kappa_max=1e4,
                 bound=5.0, w_s=None, W=None):
        self.scheme = scheme
        self.n = n
        self.L = L
        self.m = m
        self.lag = lag
        self.T_ini = T_ini
        self.kappa_max = kappa_max
        self.bound = bound
        self.w_s = w_s
        self.W = W

    def fit(self, X, y=None):
        tp = TrajectoryPredictor(self.scheme, self.n, self.L, self.m, self.lag, self.T_ini,
                                 self.kappa_max).fit(X)
        self.predictor_ = tp.predictor_
        q = tp.n_features_in_
        self.spec_ = OcpSpec.box(self.L, self.n, q, bound=self.bound, w_s=self.w_s, W=self.W)
        self.n_features_in_ = q
        self.solver_ = ActiveSetSolver()
        self._warm = None
        return self

    def solve(self, past):
        """Optimal ``(solution, past, future)`` for one ``(n, q)`` window."""
        check_is_fitted(self, "spec_")
        cqp = assemble(self.predictor_, self.spec_, past)
        sol = self.solver_.solve(cqp.qp, self._warm)
        if sol.status != OPTIMAL:
            return sol, None, None
        self._warm = sol.active_set
        pa, fu = recover_trajectory(cqp, sol.x)
        return sol, pa, fu

    def predict(self, X):
        check_is_fitted(self, "spec_")
        n, q = self.n, self.n_features_in_
        X = np.asarray(X, dtype=float)
        single = X.ndim == 2 and X.shape == (n, q)
        batch = check_array(X.reshape(1, -1) if single else X)
        if batch.shape[1] != n * q:
            raise InputError(f"past windows must have {n * q} entries, got {batch.shape[1]}")
        out = np.full((batch.shape[0], self.m), np.nan)
        for i, row in enumerate(batch):
            sol, _, fu = self.solve(row.reshape(n, q))
            if fu is not None:
                out[i] = fu[0, : self.m]
        return out[0] if single else out
