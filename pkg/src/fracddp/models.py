"""Right-hand sides of the fractional drift-diffusion systems and the confined rescaling.

Every model is written as ``d_t rho = -kappa (-Delta)^{theta/2} rho + N(rho)``.
:class:`SpectralModel` holds the precomputed multipliers for one grid and
evaluates ``N`` on half-spectrum coefficients; the public ``rhs_*`` functions
wrap it for :class:`~fracddp.spectral.Field` values.
"""
from dataclasses import dataclass, field
import enum

import numpy as np

from ._validation import check_positive, check_theta
from .driftmatrix import as_matrix
from .kernels import heat_kernel
from .spectral import Field, spectral_interpolate

__all__ = [
    "ModelKind",
    "ModelSpec",
    "SpectralModel",
    "RescaleMap",
    "rhs",
    "rhs_drift_diffusion_poisson",
    "rhs_quasi_geostrophic",
    "rhs_burgers",
    "rhs_general_drift",
    "confined_from_original",
    "distance_equivalence_check",
]


class ModelKind(str, enum.Enum):
    DRIFT_DIFFUSION_POISSON = "drift_diffusion_poisson"
    QUASI_GEOSTROPHIC = "quasi_geostrophic"
    FRACTIONAL_BURGERS = "fractional_burgers"
    GENERAL_DRIFT = "general_drift"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "ddp": cls.DRIFT_DIFFUSION_POISSON,
            "driftdiffusionpoisson": cls.DRIFT_DIFFUSION_POISSON,
            "qg": cls.QUASI_GEOSTROPHIC,
            "quasigeostrophic": cls.QUASI_GEOSTROPHIC,
            "burgers": cls.FRACTIONAL_BURGERS,
            "fractionalburgers": cls.FRACTIONAL_BURGERS,
            "general": cls.GENERAL_DRIFT,
            "generaldrift": cls.GENERAL_DRIFT,
        }
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown model kind {value!r}") from None


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Which equation to solve.

    ``drift=False`` switches the nonlinear term off, leaving the fractional heat
    equation. ``drift_matrix`` is only used by the general-drift model.
    """

    kind: ModelKind
    theta: float
    d: int
    kappa: float = 1.0
    drift_matrix: np.ndarray = field(default=None)
    drift: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        object.__setattr__(self, "theta", check_theta(self.theta))
        object.__setattr__(self, "kappa", check_positive(self.kappa, "kappa"))
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if self.kind is ModelKind.QUASI_GEOSTROPHIC and self.d != 2:
            raise ValueError("quasi-geostrophic model requires d = 2")
        if self.kind is ModelKind.FRACTIONAL_BURGERS and self.d != 1:
            raise ValueError("Burgers model requires d = 1")
        if self.kind is ModelKind.GENERAL_DRIFT:
            D = np.eye(self.d) if self.drift_matrix is None else as_matrix(self.drift_matrix)
            if D.shape != (self.d, self.d):
                raise ValueError(f"drift matrix must be {self.d}x{self.d}, got {D.shape}")
            object.__setattr__(self, "drift_matrix", D)


class SpectralModel:
    """Nonlinear term of a :class:`ModelSpec` on a fixed grid, in spectral form."""

    def __init__(self, spec, grid, dealias=True):
        if grid.d != spec.d:
            raise ValueError(f"grid dimension {grid.d} does not match model dimension {spec.d}")
        self.spec = spec
        self.grid = grid
        self.dealias = dealias
        self.symbol = spec.kappa * grid.multiplier_power(spec.theta)
        nz = grid.nonzero_modes
        self._inv_k2 = np.zeros(grid.spectral_shape)
        self._inv_k2[nz] = grid.kmag[nz] ** -2.0
        self._inv_k1 = np.zeros(grid.spectral_shape)
        self._inv_k1[nz] = 1.0 / grid.kmag[nz]
        self._mask = grid.dealias_mask if dealias else np.ones(grid.spectral_shape, dtype=bool)

    def velocity_hat(self, rho_hat):
        """Transport field ``E`` with ``N = div(rho E)`` (minus ``rho`` for Burgers)."""
        g = self.grid
        kind = self.spec.kind
        ik = g.ikvec
        if kind is ModelKind.DRIFT_DIFFUSION_POISSON:
            psi = rho_hat * self._inv_k2
            return [a * psi for a in ik]
        if kind is ModelKind.GENERAL_DRIFT:
            psi = rho_hat * self._inv_k2
            grad = [a * psi for a in ik]
            D = self.spec.drift_matrix
            return [sum(D[i, j] * grad[j] for j in range(g.d)) for i in range(g.d)]
        if kind is ModelKind.QUASI_GEOSTROPHIC:
            psi = -rho_hat * self._inv_k1
            return [-ik[1] * psi, ik[0] * psi]
        raise AssertionError(kind)

    def nonlinear(self, rho_hat):
        """Return ``(N_hat, vmax)``; ``vmax`` is the sup of the transport speed."""
        g = self.grid
        if not self.spec.drift:
            return np.zeros_like(rho_hat), 0.0
        mask = self._mask
        rho_t = g.ifft(rho_hat * mask)
        if self.spec.kind is ModelKind.FRACTIONAL_BURGERS:
            # -rho d_x rho written as -(1/2) d_x (rho^2); equal after 2/3 truncation
            sq = g.fft(rho_t * rho_t) * mask
            return -0.5 * g.ikvec[0] * sq, float(np.max(np.abs(rho_t)))
        vel = [g.ifft(v * mask) for v in self.velocity_hat(rho_hat)]
        vmax = float(np.sqrt(np.max(sum(v * v for v in vel))))
        out = np.zeros(g.spectral_shape, dtype=complex)
        for ik, v in zip(g.ikvec, vel):
            out += ik * (g.fft(rho_t * v) * mask)
        return out, vmax

    def rhs_hat(self, rho_hat):
        n_hat, _ = self.nonlinear(rho_hat)
        return -self.symbol * rho_hat + n_hat

    def rhs(self, rho):
        return Field(self.grid, self.grid.ifft(self.rhs_hat(rho.hat())))


def rhs(rho, model, dealias=True):
    return SpectralModel(model, rho.grid, dealias).rhs(rho)


def _check_density(rho):
    if not isinstance(rho, Field):
        raise TypeError(f"expected Field, got {type(rho).__name__}")
    return rho


def rhs_drift_diffusion_poisson(rho, theta):
    """``-(-Delta)^{theta/2} rho + div(rho grad psi)`` with ``-Delta psi = rho``."""
    rho = _check_density(rho)
    return rhs(rho, ModelSpec(ModelKind.DRIFT_DIFFUSION_POISSON, theta, rho.grid.d))


def rhs_quasi_geostrophic(rho, theta):
    """``-(-Delta)^{theta/2} rho + div(rho grad^perp psi)`` with ``(-Delta)^{1/2} psi = -rho``."""
    rho = _check_density(rho)
    return rhs(rho, ModelSpec(ModelKind.QUASI_GEOSTROPHIC, theta, rho.grid.d))


def rhs_burgers(rho, theta):
    """``-(-d_x^2)^{theta/2} rho - rho d_x rho`` (dealiased), d = 1."""
    rho = _check_density(rho)
    return rhs(rho, ModelSpec(ModelKind.FRACTIONAL_BURGERS, theta, rho.grid.d))


def rhs_general_drift(rho, theta, kappa, D):
    """``-kappa (-Delta)^{theta/2} rho + div(rho D grad psi)``."""
    rho = _check_density(rho)
    spec = ModelSpec(ModelKind.GENERAL_DRIFT, theta, rho.grid.d, kappa=kappa, drift_matrix=D)
    return rhs(rho, spec)


# ----------------------------------------------------------------------------
# rescaling

@dataclass(frozen=True)
class RescaleMap:
    """Original time ``s`` and confined time ``t`` with ``s = (e^{theta t} - 1)/theta``."""

    theta: float
    d: int
    M: float

    def original_time(self, t):
        return np.expm1(self.theta * np.asarray(t, dtype=float)) / self.theta

    def confined_time(self, s):
        return np.log1p(self.theta * np.asarray(s, dtype=float)) / self.theta

    def stretch(self, s):
        """``e^t`` for the confined time matching ``s``."""
        return (1.0 + self.theta * s) ** (1.0 / self.theta)


def confined_from_original(rho, M, theta, s, grid=None):
    """``u(x, t) = e^{dt} rho(e^t x, s) / M`` at the confined time ``t(s)``.

    By default ``u`` lives on the original grid shrunk by ``e^{-t}`` so every
    sample is an original sample. Passing another ``grid`` evaluates the
    spectral interpolant of ``rho`` at ``e^t x``.
    """
    theta = check_theta(theta)
    M = check_positive(M, "M")
    if s < 0:
        raise ValueError(f"s must be nonnegative, got {s}")
    rmap = RescaleMap(theta, rho.grid.d, M)
    lam = rmap.stretch(s)
    d = rho.grid.d
    if grid is None:
        grid = rho.grid.scaled(1.0 / lam)
        vals = rho.values
    else:
        vals = spectral_interpolate(rho, [lam * grid.x] * d)
    return Field(grid, lam ** d * vals / M)


def distance_equivalence_check(rho, M, theta, s):
    """Both sides of ``||rho(s) - M G(s + 1/theta)||_1 = M ||u(t) - G(1/theta)||_1``."""
    theta = check_theta(theta)
    g = rho.grid
    lhs = g.integrate(np.abs(rho.values - M * heat_kernel(theta, s + 1.0 / theta, g).values.values))
    u = confined_from_original(rho, M, theta, s)
    ref = heat_kernel(theta, 1.0 / theta, u.grid).values.values
    rhs_ = M * u.grid.integrate(np.abs(u.values - ref))
    return lhs, rhs_
