"""Integrating-factor Heun time stepping and trajectory recording.

With ``E = exp(-dt kappa |k|^theta)`` and ``N`` the nonlinear term, one step is

    u*      = E (u + dt N(u))
    u_{n+1} = E u + dt/2 (E N(u) + N(u*))

in Fourier space. The linear part is exact, so with the drift switched off the
scheme reproduces the fractional heat semigroup for any ``dt``.
"""
from dataclasses import dataclass, field
import math
from pathlib import Path
from typing import List

import numpy as np

from ._validation import check_positive, check_theta
from .diagnostics import DiagnosticsConfig, compute_record
from .exceptions import CFLViolation, NonFiniteState, PositivityLoss
from .kernels import heat_kernel
from .models import ModelSpec, SpectralModel
from .spectral import Field, GridSpec

__all__ = [
    "SolverConfig",
    "Trajectory",
    "Stepper",
    "step",
    "run",
    "initial_density",
    "write_snapshot",
    "read_snapshot",
    "SNAPSHOT_FORMAT",
]

SNAPSHOT_FORMAT = "fracddp-snapshot-1"


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    output_every: int = 1
    dealias: bool = True
    cfl_safety: float = 1.0
    positivity_tol: float = 1e-8
    store_snapshots: bool = True

    def __post_init__(self):
        check_positive(self.dt, "dt")
        check_positive(self.t_end, "t_end")
        if int(self.output_every) != self.output_every or self.output_every < 1:
            raise ValueError(f"output_every must be an integer >= 1, got {self.output_every}")
        if not (0.0 < self.cfl_safety <= 1.0):
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if self.positivity_tol < 0:
            raise ValueError("positivity_tol must be nonnegative")

    @property
    def n_steps(self):
        # a final step shorter than dt is allowed; tiny remainders are absorbed
        return max(1, int(math.ceil(self.t_end / self.dt - 1e-9)))


@dataclass
class Trajectory:
    model: ModelSpec
    grid: GridSpec
    times: List[float] = field(default_factory=list)
    snapshots: List[Field] = field(default_factory=list)
    records: list = field(default_factory=list)
    mass: float = 0.0
    steps: int = 0

    def column(self, name):
        from .diagnostics import CSV_COLUMNS

        i = CSV_COLUMNS.index(name)
        return np.array([r.row()[i] for r in self.records])

    @property
    def final(self):
        return self.snapshots[-1] if self.snapshots else None


class Stepper:
    """Caches the multipliers of one (model, grid) pair; advances spectral states."""

    def __init__(self, model, grid, dealias=True, cfl_safety=1.0):
        self.model = model
        self.grid = grid
        self.cfl_safety = cfl_safety
        self.spectral = SpectralModel(model, grid, dealias)
        self._dt = None
        self._E = None

    def propagator(self, dt):
        if dt != self._dt:
            self._E = np.exp(-dt * self.spectral.symbol)
            self._dt = dt
        return self._E

    def max_dt(self, vmax):
        return self.cfl_safety * self.grid.h / max(1.0, vmax)

    def advance(self, u_hat, dt, step_index=None):
        E = self.propagator(dt)
        if not self.model.drift:
            return E * u_hat
        n0, vmax = self.spectral.nonlinear(u_hat)
        limit = self.max_dt(vmax)
        if dt > limit * (1.0 + 1e-12):
            raise CFLViolation(f"dt = {dt:g} exceeds CFL limit {limit:g} (sup speed {vmax:g})", step_index)
        En0 = E * n0
        star = E * u_hat + dt * En0
        n1, _ = self.spectral.nonlinear(star)
        return E * u_hat + 0.5 * dt * (En0 + n1)


def step(rho, model, dt, *, dealias=True, cfl_safety=1.0):
    """One integrating-factor Heun step of size ``dt``."""
    check_positive(dt, "dt")
    st = Stepper(model, rho.grid, dealias, cfl_safety)
    out = st.grid.ifft(st.advance(rho.hat(), dt, 0))
    if not np.all(np.isfinite(out)):
        raise NonFiniteState("non-finite state after step", 0)
    return Field(rho.grid, out)


def _check_positive_state(values, tol, step_index, t):
    vmax = float(np.max(np.abs(values)))
    vmin = float(np.min(values))
    if vmin < -tol * vmax:
        raise PositivityLoss(
            f"min rho = {vmin:.3e} below -{tol:g} * max|rho| = {-tol * vmax:.3e} at t = {t:g}",
            step_index,
        )


def run(rho0, model, config, diagnostics=None, *, callback=None):
    """Integrate from ``rho0`` to ``config.t_end``.

    Outputs are taken at ``t = 0``, every ``output_every`` steps and at the last
    step. ``diagnostics=False`` skips the per-output records.
    """
    grid = rho0.grid
    if grid.d != model.d:
        raise ValueError(f"initial data has d = {grid.d}, model has d = {model.d}")
    M = rho0.integral()
    if not M > 0:
        raise ValueError(f"initial mass must be positive, got {M}")
    _check_positive_state(rho0.values, config.positivity_tol, 0, 0.0)
    diag = DiagnosticsConfig() if diagnostics is None else diagnostics
    st = Stepper(model, grid, config.dealias, config.cfl_safety)
    traj = Trajectory(model=model, grid=grid, mass=M)

    def emit(values, t, n):
        f = Field(grid, values)
        traj.times.append(float(t))
        if config.store_snapshots:
            traj.snapshots.append(f)
        if diag is not False:
            traj.records.append(compute_record(f, t, M, model.theta, diag))
        if callback is not None:
            callback(n, t, f)

    emit(rho0.values, 0.0, 0)
    u_hat = rho0.hat()
    n_steps = config.n_steps
    t = 0.0
    for n in range(1, n_steps + 1):
        dt = config.dt if n < n_steps else config.t_end - (n_steps - 1) * config.dt
        u_hat = st.advance(u_hat, dt, n)
        if not np.all(np.isfinite(u_hat)):
            raise NonFiniteState(f"non-finite state at step {n}", n)
        t = config.t_end if n == n_steps else n * config.dt
        if n % config.output_every == 0 or n == n_steps:
            values = grid.ifft(u_hat)
            _check_positive_state(values, config.positivity_tol, n, t)
            emit(values, t, n)
    traj.steps = n_steps
    if not config.store_snapshots:
        traj.snapshots.append(Field(grid, grid.ifft(u_hat)))
    return traj


def initial_density(grid, theta, amplitude=0.5, *, perturbation=0.0, seed=None, modes=3):
    """``A G_theta(., 1)``, optionally times ``1 + eps phi`` with a seeded smooth ``phi``.

    ``phi`` is a sum of low-frequency plane waves at scale ``~1`` with random
    phases, normalized to ``max |phi| = 1``, so positivity holds for ``eps < 1``.
    """
    theta = check_theta(theta)
    check_positive(amplitude, "amplitude")
    G = heat_kernel(theta, 1.0, grid).values.values
    if perturbation == 0.0:
        return Field(grid, amplitude * G)
    if not (0.0 <= perturbation < 1.0):
        raise ValueError(f"perturbation must lie in [0, 1), got {perturbation}")
    rng = np.random.default_rng(seed)
    phi = np.zeros(grid.shape)
    coords = grid.coords
    for _ in range(modes):
        kdir = rng.normal(size=grid.d)
        kdir *= rng.uniform(0.5, 1.5) / np.linalg.norm(kdir)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        phi += np.cos(sum(k * x for k, x in zip(kdir, coords)) + phase)
    phi /= np.max(np.abs(phi))
    return Field(grid, amplitude * G * (1.0 + perturbation * phi))


# ----------------------------------------------------------------------------
# snapshot files
#
# <stem>.bin  raw little-endian float64, C (row-major) order, axis 0 = x_1
# <stem>.txt  "key = value" lines: format, d, L, N, dtype, order, time, model
#             fields (kind, theta, d, kappa, drift_matrix as row-major list)

def write_snapshot(path_stem, rho, time, model=None):
    stem = Path(path_stem)
    g = rho.grid
    data = np.ascontiguousarray(rho.values, dtype="<f8")
    stem.with_suffix(".bin").write_bytes(data.tobytes(order="C"))
    lines = [
        f"format = {SNAPSHOT_FORMAT}",
        f"d = {g.d}",
        f"L = {g.L!r}",
        f"N = {g.N}",
        "dtype = <f8",
        "order = C",
        f"shape = {' '.join(str(n) for n in g.shape)}",
        f"time = {float(time)!r}",
    ]
    if model is not None:
        lines += [
            f"kind = {model.kind.value}",
            f"theta = {model.theta!r}",
            f"kappa = {model.kappa!r}",
        ]
        if model.drift_matrix is not None:
            lines.append("drift_matrix = " + " ".join(repr(float(v)) for v in model.drift_matrix.ravel()))
    stem.with_suffix(".txt").write_text("\n".join(lines) + "\n")
    return stem.with_suffix(".bin"), stem.with_suffix(".txt")


def read_snapshot(path_stem):
    """Return ``(Field, time, meta)`` from a snapshot pair."""
    stem = Path(path_stem)
    meta = {}
    for line in stem.with_suffix(".txt").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    if meta.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"{stem}: unknown snapshot format {meta.get('format')!r}")
    grid = GridSpec(int(meta["d"]), float(meta["L"]), int(meta["N"]))
    raw = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8")
    if raw.size != grid.size:
        raise ValueError(f"{stem}: expected {grid.size} values, found {raw.size}")
    return Field(grid, raw.reshape(grid.shape).astype(float)), float(meta["time"]), meta
