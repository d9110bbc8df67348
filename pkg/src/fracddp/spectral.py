"""Periodic-box grids, real fields and Fourier-multiplier operators.

The whole space is replaced by the box ``[-L, L)^d`` sampled with ``N`` points
per axis, ``x_n = -L + n h`` with ``h = 2L/N``. Wavenumbers are ``k_j = pi j / L``
for ``j`` in ``[-N/2, N/2)``. Field values are stored as arrays of shape
``(N,) * d`` indexed ``[i_1, ..., i_d]`` (axis ``a`` is coordinate ``x_{a+1}``);
flattening in C (row-major) order gives the documented 1-D layout.

Internally transforms use ``scipy.fft.rfftn``: the last axis carries the
half spectrum ``j = 0..N/2``. Odd multipliers (derivatives) vanish on Nyquist
modes so that real fields map to real fields.
"""
from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
import scipy.fft as sfft

from ._validation import check_finite_array, check_theta

__all__ = [
    "GridSpec",
    "Field",
    "fractional_laplacian",
    "fractional_laplacian_direct_1d",
    "fractional_laplacian_constant",
    "gradient",
    "divergence",
    "laplacian",
    "poisson_solve",
    "half_laplacian_inverse",
    "perp_gradient",
    "dealiased_product",
    "padded_product",
    "spectral_interpolate",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``[-L, L)^d``."""

    d: int
    L: float
    N: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be positive, got {self.L}")
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 4, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self):
        return 2.0 * self.L / self.N

    @property
    def shape(self):
        return (self.N,) * self.d

    @property
    def size(self):
        return self.N ** self.d

    @property
    def cell_volume(self):
        return self.h ** self.d

    @property
    def volume(self):
        return (2.0 * self.L) ** self.d

    def scaled(self, factor):
        """Same ``N``, half-width ``factor * L``."""
        return GridSpec(self.d, self.L * factor, self.N)

    @cached_property
    def x(self):
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def coords(self):
        """Coordinate arrays, one per axis, each broadcast to full shape."""
        return tuple(np.meshgrid(*([self.x] * self.d), indexing="ij"))

    @cached_property
    def radius(self):
        return np.sqrt(sum(c * c for c in self.coords))

    @cached_property
    def k(self):
        """1-D wavenumbers in FFT order (``k_j = pi j / L``)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    @cached_property
    def spectral_shape(self):
        return (self.N,) * (self.d - 1) + (self.N // 2 + 1,)

    @cached_property
    def kvec(self):
        """Wavenumber components on the half spectrum, broadcastable arrays."""
        out = []
        for axis in range(self.d):
            if axis == self.d - 1:
                ka = np.abs(self.k[: self.N // 2 + 1])
            else:
                ka = self.k
            shape = [1] * self.d
            shape[axis] = ka.size
            out.append(ka.reshape(shape))
        return tuple(out)

    @cached_property
    def ikvec(self):
        """``i k_a`` with Nyquist modes zeroed (odd multipliers)."""
        nyq = np.pi * self.N / (2.0 * self.L)
        out = []
        for ka in self.kvec:
            ik = 1j * ka
            ik = np.where(np.isclose(np.abs(ka), nyq), 0.0, ik)
            out.append(ik)
        return tuple(out)

    @cached_property
    def kmag(self):
        k2 = sum(np.broadcast_to(ka, self.spectral_shape) ** 2 for ka in self.kvec)
        return np.sqrt(k2)

    @cached_property
    def nonzero_modes(self):
        mask = np.ones(self.spectral_shape, dtype=bool)
        mask[(0,) * self.d] = False
        return mask

    @cached_property
    def dealias_mask(self):
        """2/3 rule: keep ``|j_a| <= kc`` on every axis with ``3 kc < N``."""
        kc = math.ceil(self.N / 3) - 1
        j = np.abs(np.fft.fftfreq(self.N, d=1.0 / self.N)).round().astype(int)
        mask = np.ones(self.spectral_shape, dtype=bool)
        for axis in range(self.d):
            ja = j if axis < self.d - 1 else j[: self.N // 2 + 1]
            shape = [1] * self.d
            shape[axis] = ja.size
            mask = mask & (ja.reshape(shape) <= kc)
        return mask

    # transforms -------------------------------------------------------
    def fft(self, values):
        return sfft.rfftn(values, axes=tuple(range(self.d)))

    def ifft(self, hat):
        return sfft.irfftn(hat, s=self.shape, axes=tuple(range(self.d)))

    def multiplier_power(self, theta):
        """``|k|^theta`` on the half spectrum with the zero mode set to 0."""
        out = np.zeros(self.spectral_shape)
        km = self.kmag
        out[self.nonzero_modes] = km[self.nonzero_modes] ** theta
        return out

    def integrate(self, values):
        """Rectangle rule ``h^d * sum``."""
        return float(np.sum(values) * self.cell_volume)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a scalar function on a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            if vals.size == self.grid.size:
                vals = vals.reshape(self.grid.shape)
            else:
                raise ValueError(
                    f"field has {vals.size} values, grid expects {self.grid.size}"
                )
        check_finite_array(vals, "field values")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid, func):
        """Sample ``func(*coords)`` on the grid."""
        return cls(grid, np.broadcast_to(func(*grid.coords), grid.shape).copy())

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    def flat(self):
        return self.values.reshape(-1)

    def integral(self):
        return self.grid.integrate(self.values)

    def hat(self):
        return self.grid.fft(self.values)


def _as_field(f):
    if not isinstance(f, Field):
        raise TypeError(f"expected Field, got {type(f).__name__}")
    return f


def _apply(f, multiplier):
    g = f.grid
    return Field(g, g.ifft(f.hat() * multiplier))


def fractional_laplacian(f, theta):
    """Apply ``(-Delta)^{theta/2}`` via the multiplier ``|k|^theta``."""
    f = _as_field(f)
    theta = check_theta(theta)
    return _apply(f, f.grid.multiplier_power(theta))


def laplacian(f):
    f = _as_field(f)
    return _apply(f, -f.grid.kmag ** 2)


def gradient(f):
    """Spectral gradient, a tuple of ``d`` fields."""
    f = _as_field(f)
    g = f.grid
    fh = f.hat()
    return tuple(Field(g, g.ifft(ik * fh)) for ik in g.ikvec)


def divergence(components):
    components = tuple(components)
    g = components[0].grid
    if len(components) != g.d:
        raise ValueError(f"need {g.d} components, got {len(components)}")
    total = sum(ik * c.hat() for ik, c in zip(g.ikvec, components))
    return Field(g, g.ifft(total))


def _inverse_power(grid, power):
    out = np.zeros(grid.spectral_shape)
    nz = grid.nonzero_modes
    out[nz] = grid.kmag[nz] ** (-power)
    return out


def poisson_solve(rho):
    """Zero-mean solution of ``-Delta psi = rho - mean(rho)``."""
    rho = _as_field(rho)
    return _apply(rho, _inverse_power(rho.grid, 2.0))


def half_laplacian_inverse(rho):
    """Zero-mean ``psi`` with ``(-Delta)^{1/2} psi = -(rho - mean(rho))``, d = 2 only."""
    rho = _as_field(rho)
    if rho.grid.d != 2:
        raise ValueError(f"half_laplacian_inverse requires d = 2, got d = {rho.grid.d}")
    return _apply(rho, -_inverse_power(rho.grid, 1.0))


def perp_gradient(f):
    """``(-d_2 f, d_1 f)`` in two dimensions."""
    f = _as_field(f)
    if f.grid.d != 2:
        raise ValueError(f"perp_gradient requires d = 2, got d = {f.grid.d}")
    d1, d2 = gradient(f)
    return (Field(f.grid, -d2.values), d1)


def dealiased_product(f, g):
    """Pointwise product with 2/3-rule truncation of both factors and of the result."""
    f, g = _as_field(f), _as_field(g)
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    grid = f.grid
    mask = grid.dealias_mask
    ft = grid.ifft(f.hat() * mask)
    gt = grid.ifft(g.hat() * mask)
    return Field(grid, grid.ifft(grid.fft(ft * gt) * mask))


def padded_product(f, g, factor=3):
    """Reference product: truncate, zero-pad by ``factor``, multiply, project back.

    Used as an independent oracle for :func:`dealiased_product`.
    """
    grid = f.grid
    N, d = grid.N, grid.d
    M = factor * N
    mask = grid.dealias_mask

    def full_coeffs(field_):
        c = sfft.fftn(field_.values) / N ** d
        # rebuild the full-spectrum mask from the half-spectrum one
        full_mask = np.ones((N,) * d, dtype=bool)
        kc = math.ceil(N / 3) - 1
        j = np.abs(np.fft.fftfreq(N, d=1.0 / N)).round().astype(int)
        for axis in range(d):
            shape = [1] * d
            shape[axis] = N
            full_mask &= j.reshape(shape) <= kc
        return c * full_mask

    def pad(c):
        out = np.zeros((M,) * d, dtype=complex)
        jN = np.fft.fftfreq(N, d=1.0 / N).round().astype(int)
        idx = np.ix_(*([jN % M] * d))
        out[idx] = c
        return out

    cf, cg = pad(full_coeffs(f)), pad(full_coeffs(g))
    prod = sfft.ifftn(cf * M ** d) * sfft.ifftn(cg * M ** d)
    cp = sfft.fftn(prod) / M ** d
    jN = np.fft.fftfreq(N, d=1.0 / N).round().astype(int)
    back = cp[np.ix_(*([jN % M] * d))]
    vals = np.real(sfft.ifftn(back * N ** d))
    return Field(grid, grid.ifft(grid.fft(vals) * mask))


def spectral_interpolate(f, axes):
    """Evaluate the trigonometric interpolant of ``f`` on a tensor grid.

    ``axes`` is a sequence of ``d`` 1-D coordinate arrays. Nyquist modes are
    evaluated as cosines so that the interpolant is real.
    """
    f = _as_field(f)
    grid = f.grid
    if len(axes) != grid.d:
        raise ValueError(f"need {grid.d} coordinate arrays, got {len(axes)}")
    coeffs = sfft.fftn(f.values) / grid.size
    k = grid.k
    nyq = grid.N // 2
    out = coeffs
    for axis, xa in enumerate(axes):
        xa = np.asarray(xa, dtype=float) + grid.L
        basis = np.exp(1j * np.outer(xa, k))
        basis[:, nyq] = np.cos(k[nyq] * xa)
        out = np.moveaxis(np.tensordot(basis, out, axes=([1], [axis])), 0, axis)
    return np.real(out)


def fractional_laplacian_constant(d, theta):
    """Normalizing constant of the singular-integral form of ``(-Delta)^{theta/2}``.

    ``theta 2^{theta-1} Gamma((d+theta)/2) / (pi^{d/2} Gamma(1-theta/2))``, the
    value that matches the symbol ``|xi|^theta``.
    """
    return (
        theta
        * 2.0 ** (theta - 1.0)
        * math.gamma((d + theta) / 2.0)
        / (math.pi ** (d / 2.0) * math.gamma(1.0 - theta / 2.0))
    )


def fractional_laplacian_direct_1d(f, theta, x, *, oscillation_period=None, tol=1e-10):
    """Singular-integral evaluation of ``(-d_x^2)^{theta/2} f`` at a point, ``0 < theta < 1``.

    Symmetrized as ``-c int_0^inf (f(x+y) + f(x-y) - 2 f(x)) y^{-1-theta} dy``.
    For non-decaying oscillatory ``f`` pass ``oscillation_period`` so the tail
    is summed over periods with series acceleration.
    """
    from scipy import integrate

    from .exceptions import QuadratureError

    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError(f"direct evaluation requires 0 < theta < 1, got {theta}")
    x = float(x)
    fx = float(f(x))

    def sym(y):
        return float(f(x + y)) + float(f(x - y)) - 2.0 * fx

    near, _, info_near = _quad_checked(
        integrate.quad, lambda y: sym(y) * y ** (-1.0 - theta), 0.0, 1.0, tol
    )
    # the constant -2 f(x) part of the tail is exact
    const_tail = -2.0 * fx / theta
    if oscillation_period is None:
        far, _, info_far = _quad_checked(
            integrate.quad,
            lambda y: (float(f(x + y)) + float(f(x - y))) * y ** (-1.0 - theta),
            1.0,
            np.inf,
            tol,
        )
        if not (info_near and info_far):
            raise QuadratureError("quadrature for the singular integral did not converge")
    else:
        import mpmath

        if not info_near:
            raise QuadratureError("near-field quadrature did not converge")
        try:
            far = float(
                mpmath.quadosc(
                    lambda y: (float(f(x + float(y))) + float(f(x - float(y))))
                    * float(y) ** (-1.0 - theta),
                    [1.0, mpmath.inf],
                    period=oscillation_period,
                )
            )
        except Exception as exc:  # mpmath raises generic errors on failure
            raise QuadratureError(f"oscillatory tail quadrature failed: {exc}") from exc
    c = fractional_laplacian_constant(1, theta)
    return -c * (near + far + const_tail)


def _quad_checked(quad, func, a, b, tol):
    import warnings

    from scipy.integrate import IntegrationWarning

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, err = quad(func, a, b, epsabs=tol, epsrel=tol, limit=500)
        except (IntegrationWarning, OverflowError, ZeroDivisionError):
            return np.nan, np.inf, False
    return val, err, True
