"""scikit-learn style wrappers around the solver and the rate fit.

``FractionalDriftDiffusion`` treats each row of ``X`` as a flattened initial
density on the configured grid; ``transform`` evolves rows to ``t_end``.
``DecayRateRegressor`` fits ``y = C t^slope`` on a window.
"""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .diagnostics import fit_decay_rate
from .integrator import SolverConfig, initial_density, run
from .models import ModelSpec
from .spectral import Field, GridSpec

__all__ = ["FractionalDriftDiffusion", "DecayRateRegressor"]


class FractionalDriftDiffusion(TransformerMixin, BaseEstimator):
    def __init__(self, kind="drift_diffusion_poisson", theta=0.8, d=2, L=40.0, N=256,
                 dt=0.05, t_end=20.0, output_every=5, kappa=1.0, drift_matrix=None,
                 drift=True, dealias=True, cfl_safety=1.0, amplitude=0.5):
        self.kind = kind
        self.theta = theta
        self.d = d
        self.L = L
        self.N = N
        self.dt = dt
        self.t_end = t_end
        self.output_every = output_every
        self.kappa = kappa
        self.drift_matrix = drift_matrix
        self.drift = drift
        self.dealias = dealias
        self.cfl_safety = cfl_safety
        self.amplitude = amplitude

    def _setup(self):
        spec = ModelSpec(self.kind, self.theta, self.d, kappa=self.kappa,
                         drift_matrix=self.drift_matrix, drift=self.drift)
        grid = GridSpec(self.d, self.L, self.N)
        solver = SolverConfig(dt=self.dt, t_end=self.t_end, output_every=self.output_every,
                              dealias=self.dealias, cfl_safety=self.cfl_safety)
        return spec, grid, solver

    def _rows(self, X, grid):
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != grid.size:
            raise ValueError(f"expected {grid.size} features (N^d), got {X.shape[1]}")
        return X

    def fit(self, X=None, y=None):
        """Run from the first row of ``X`` (default ``A G_theta(., 1)``) and keep its diagnostics."""
        spec, grid, solver = self._setup()
        if X is None:
            rho0 = initial_density(grid, spec.theta, self.amplitude)
        else:
            rho0 = Field(grid, self._rows(X, grid)[0])
        traj = run(rho0, spec, solver)
        self.grid_ = grid
        self.model_ = spec
        self.trajectory_ = traj
        self.records_ = traj.records
        self.times_ = np.asarray(traj.times)
        self.mass_ = traj.mass
        self.n_features_in_ = grid.size
        return self

    def transform(self, X):
        check_is_fitted(self, "trajectory_")
        _, _, solver = self._setup()
        rows = self._rows(X, self.grid_)
        quiet = SolverConfig(dt=solver.dt, t_end=solver.t_end, output_every=solver.n_steps,
                             dealias=solver.dealias, cfl_safety=solver.cfl_safety,
                             store_snapshots=False)
        out = np.empty_like(rows)
        for i, r in enumerate(rows):
            traj = run(Field(self.grid_, r), self.model_, quiet, diagnostics=False)
            out[i] = traj.final.flat()
        return out

    def decay_rate(self, column, window):
        check_is_fitted(self, "trajectory_")
        return fit_decay_rate(self.times_, self.trajectory_.column(column), window)


class DecayRateRegressor(RegressorMixin, BaseEstimator):
    """Log-log least squares ``log y = log C + slope log t`` restricted to ``window``."""

    def __init__(self, window=None):
        self.window = window

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=5)
        t = X[:, 0]
        window = self.window if self.window is not None else (float(t[t > 0].min()), float(t.max()))
        fit = fit_decay_rate(t, y, window)
        self.fit_ = fit
        self.slope_ = fit.slope
        self.intercept_ = fit.intercept
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "slope_")
        X = check_array(X)
        return np.exp(self.intercept_) * X[:, 0] ** self.slope_
