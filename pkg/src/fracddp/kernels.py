"""Fractional heat kernels on the periodic box and their identities.

``heat_kernel`` is always computed spectrally from ``exp(-t |k|^theta)``; on a
box this is the periodization of the whole-space kernel. The closed forms for
``theta in {1, 2}`` live in :func:`kernel_closed_form` and are used as oracles
only, either in whole space or summed over periodic images.
"""
import csv
from dataclasses import dataclass
import io
import math

import numpy as np
from scipy import special

from ._validation import check_positive, check_theta
from .spectral import Field, GridSpec, gradient, spectral_interpolate

__all__ = [
    "KernelSample",
    "heat_kernel",
    "heat_kernel_values",
    "kernel_closed_form",
    "closed_form_on_grid",
    "self_similarity_check",
    "SimilarityReport",
    "pointwise_bounds_report",
    "gradient_bound_report",
    "GradientBoundReport",
    "time_difference_decay",
    "TimeDifferenceTable",
    "semigroup_error",
    "convolve",
]


@dataclass(frozen=True, eq=False)
class KernelSample:
    theta: float
    t: float
    grid: GridSpec
    values: Field

    def mass(self):
        return self.values.integral()


def heat_kernel_hat(theta, t, grid):
    """Half-spectrum coefficients of ``G_theta(., t)`` centred at ``x = 0``."""
    mult = np.exp(-t * grid.multiplier_power(theta))
    # x_0 = -L, so centring at the origin is a shift by N/2 samples per axis
    phase = np.ones(grid.spectral_shape)
    for axis in range(grid.d):
        n = grid.spectral_shape[axis]
        j = np.arange(n)
        shape = [1] * grid.d
        shape[axis] = n
        phase = phase * ((-1.0) ** j).reshape(shape)
    return mult * phase * (grid.size / grid.volume)


def heat_kernel_values(theta, t, grid):
    return grid.ifft(heat_kernel_hat(theta, t, grid))


def heat_kernel(theta, t, grid):
    """Sample ``G_theta(., t)`` with discrete mass exactly 1 on the box."""
    theta = check_theta(theta)
    t = check_positive(t, "t")
    return KernelSample(theta, t, grid, Field(grid, heat_kernel_values(theta, t, grid)))


# ----------------------------------------------------------------------------
# closed forms

def _points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise ValueError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


def kernel_closed_form(theta, d, t, x, *, period=None):
    """Analytic ``G_theta(x, t)`` for ``theta = 2`` (Gaussian) or ``theta = 1`` (Poisson kernel).

    ``x`` holds points with trailing dimension ``d`` (a scalar or 1-D array is
    accepted when ``d = 1``). With ``period = 2L`` the kernel is summed over the
    periodic images, matching the spectral kernel on ``[-L, L)^d``; the
    ``theta = 1`` periodization is available for ``d <= 2``.
    """
    if theta not in (1, 2, 1.0, 2.0):
        raise ValueError("closed forms exist only for theta in {1, 2}")
    t = check_positive(t, "t")
    pts = _points(x, d)
    if period is None:
        r2 = np.sum(pts ** 2, axis=-1)
        if theta == 2:
            return (4 * np.pi * t) ** (-d / 2) * np.exp(-r2 / (4 * t))
        c = math.gamma((d + 1) / 2) / np.pi ** ((d + 1) / 2)
        return c * t / (t * t + r2) ** ((d + 1) / 2)
    L = period / 2.0
    if theta == 2:
        return _periodic_gaussian(pts, t, L)
    if d == 1:
        return _periodic_cauchy_1d(pts[..., 0], t, L)
    if d == 2:
        return _periodic_cauchy_2d(pts[..., 0], pts[..., 1], t, L)
    raise NotImplementedError("periodized Poisson kernel implemented for d <= 2")


def closed_form_on_grid(theta, t, grid, *, periodic=True):
    """Closed-form kernel sampled on every grid point (tensor-product fast path)."""
    if not periodic:
        return kernel_closed_form(theta, grid.d, t, np.stack(grid.coords, axis=-1))
    if theta == 1 and grid.d == 2:
        x = grid.x
        return _periodic_cauchy_2d_tensor(x, x, t, grid.L)
    return kernel_closed_form(theta, grid.d, t, np.stack(grid.coords, axis=-1), period=2 * grid.L)


def _periodic_gaussian(pts, t, L):
    # images decay like exp(-(2Lm)^2 / 4t); stop once negligible
    mmax = int(np.ceil(np.sqrt(4 * t * 60.0) / (2 * L))) + 1
    m = np.arange(-mmax, mmax + 1)
    out = np.ones(pts.shape[:-1])
    for axis in range(pts.shape[-1]):
        xa = pts[..., axis][..., None] + 2 * L * m
        out = out * np.sum(np.exp(-xa ** 2 / (4 * t)), axis=-1) / np.sqrt(4 * np.pi * t)
    return out


def _periodic_cauchy_1d(x, t, L):
    a = np.pi * t / L
    return np.sinh(a) / (2 * L * (np.cosh(a) - np.cos(np.pi * x / L)))


def _periodic_cauchy_2d(x1, x2, t, L, zmax=60.0):
    """Images in ``x1``, Poisson summation in ``x2``.

    For fixed image ``m`` with ``a^2 = t^2 + (x1 + 2Lm)^2`` the ``x2``-periodization of
    ``t / (2 pi (a^2 + y^2)^{3/2})`` has Fourier coefficients ``(t/pi) k K_1(a k) / a``
    (divided by ``2L``). The zero-frequency terms sum over ``m`` in closed form.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    a0 = np.pi * t / L
    out = np.sinh(a0) / (4 * L * L * (np.cosh(a0) - np.cos(np.pi * x1 / L)))
    mmax = int(np.ceil((zmax / np.pi + 1) / 2)) + 1
    jmax = int(np.ceil(zmax * L / (np.pi * t))) + 1
    kj = np.pi * np.arange(1, jmax + 1) / L
    cosk = np.cos(np.multiply.outer(x2, kj))
    for m in range(-mmax, mmax + 1):
        a = np.sqrt(t * t + (x1 + 2 * L * m) ** 2)
        z = np.multiply.outer(a, kj)
        terms = np.where(z < zmax + 50, special.k1e(z) * np.exp(-z), 0.0)
        out = out + (t / (np.pi * L)) * np.sum(
            (kj / a[..., None]) * terms * cosk, axis=-1
        )
    return out


def _periodic_cauchy_2d_tensor(x1, x2, t, L, zmax=60.0):
    """Same sum as :func:`_periodic_cauchy_2d` on the tensor grid ``x1 x x2``."""
    a0 = np.pi * t / L
    base = np.sinh(a0) / (4 * L * L * (np.cosh(a0) - np.cos(np.pi * x1 / L)))
    mmax = int(np.ceil((zmax / np.pi + 1) / 2)) + 1
    jmax = int(np.ceil(zmax * L / (np.pi * t))) + 1
    kj = np.pi * np.arange(1, jmax + 1) / L
    coef = np.zeros((x1.size, kj.size))
    for m in range(-mmax, mmax + 1):
        a = np.sqrt(t * t + (x1 + 2 * L * m) ** 2)
        z = np.multiply.outer(a, kj)
        coef += (kj / a[:, None]) * special.k1e(z) * np.exp(-z)
    coef *= t / (np.pi * L)
    return base[:, None] + coef @ np.cos(np.multiply.outer(kj, x2))


# ----------------------------------------------------------------------------
# identities

def convolve(f, g):
    """Periodic convolution ``int f(x - y) g(y) dy`` evaluated spectrally."""
    grid = f.grid
    fh = f.hat()
    gh = g.hat()
    # re-centre: both inputs index x_0 = -L, so the product carries an extra shift
    out = grid.ifft(fh * gh) * grid.cell_volume
    return Field(grid, np.roll(out, shift=[grid.N // 2] * grid.d, axis=tuple(range(grid.d))))


def semigroup_error(theta, t1, t2, grid):
    """``max |G(t1) * G(t2) - G(t1 + t2)|`` relative to ``max G(t1 + t2)``."""
    g12 = convolve(heat_kernel(theta, t1, grid).values, heat_kernel(theta, t2, grid).values)
    ref = heat_kernel(theta, t1 + t2, grid).values.values
    return float(np.max(np.abs(g12.values - ref)) / np.max(np.abs(ref)))


@dataclass(frozen=True)
class SimilarityReport:
    max_error: float
    l1_error: float


def self_similarity_check(theta, t, lam, grid):
    """Compare ``lam^d G(lam x, lam^theta t)`` with ``G(x, t)``.

    The left side is computed on the grid scaled by ``lam`` (same ``N``) and
    brought to the base grid points by spectral interpolation; both sides are
    compared on ``|x| <= L / (2 max(lam, 1))``.
    """
    theta = check_theta(theta)
    lam = check_positive(lam, "lambda")
    d = grid.d
    right = heat_kernel(theta, t, grid).values.values
    if lam == 1.0:
        left = right.copy()
    else:
        big = grid.scaled(lam)
        g_big = heat_kernel(theta, lam ** theta * t, big).values
        left = lam ** d * spectral_interpolate(g_big, [lam * grid.x] * d)
    region = grid.radius <= grid.L / (2 * max(lam, 1.0))
    diff = np.abs(left - right)[region]
    return SimilarityReport(float(diff.max()), float(diff.sum() * grid.cell_volume))


def pointwise_bounds_report(theta, t, K, grid):
    """Ranges of ``G t^{d/theta}`` (inner region) and ``G |x|^{d+theta} / t`` (outer region).

    Inner: ``|x| <= K t^{1/theta}``. Outer: ``K t^{1/theta} <= |x| <= L/2`` (beyond
    ``L/2`` periodic images dominate the tail). The outer range is ``None`` for
    ``theta = 2``, where Gaussian tails are lighter than algebraic.
    """
    theta = check_theta(theta)
    d = grid.d
    G = heat_kernel(theta, t, grid).values.values
    r = grid.radius
    scale = t ** (1.0 / theta)
    inner = r <= K * scale
    inner_ratio = G[inner] * t ** (d / theta)
    out = {"inner_ratio_range": (float(inner_ratio.min()), float(inner_ratio.max()))}
    if theta == 2.0:
        out["outer_ratio_range"] = None
    else:
        outer = (r >= K * scale) & (r <= grid.L / 2)
        if not outer.any():
            raise ValueError("box too small for the outer region; increase L")
        outer_ratio = G[outer] * r[outer] ** (d + theta) / t
        out["outer_ratio_range"] = (float(outer_ratio.min()), float(outer_ratio.max()))
    return out


@dataclass(frozen=True)
class GradientBoundReport:
    sup_ratio: float
    radius_at_sup: float
    ratio: np.ndarray


def gradient_bound_report(theta, t, grid):
    """Sup over ``|x| <= L/2`` of ``|grad G| / (min(t^{-1/theta}, |x|^{-1}) G)``."""
    theta = check_theta(theta)
    kern = heat_kernel(theta, t, grid).values
    grads = gradient(kern)
    gnorm = np.sqrt(sum(g.values ** 2 for g in grads))
    r = grid.radius
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.minimum(t ** (-1.0 / theta), np.where(r > 0, 1.0 / r, np.inf))
        # Gaussian tails underflow far out; only |x| <= L/2 is reported
        ratio = gnorm / (weight * kern.values)
    ratio = np.where(r <= grid.L / 2, ratio, np.nan)
    idx = np.nanargmax(ratio)
    return GradientBoundReport(float(ratio.flat[idx]), float(r.flat[idx]), ratio)


@dataclass(frozen=True)
class TimeDifferenceTable:
    theta: float
    s: np.ndarray
    D: np.ndarray

    @property
    def D_halfrate(self):
        return self.D * np.sqrt(1 + self.theta * self.s)

    @property
    def D_fullrate(self):
        return self.D * (1 + self.s)

    def to_csv(self, path_or_buf=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "D", "D_halfrate", "D_fullrate"])
        for row in zip(self.s, self.D, self.D_halfrate, self.D_fullrate):
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text


def default_decay_grid(theta, s_values, d=1):
    """A box wide enough for algebraic tails at the largest time and fine enough at the smallest."""
    s_values = np.asarray(s_values, dtype=float)
    big = (s_values.max() + 1.0 / theta) ** (1.0 / theta)
    small = s_values.min() ** (1.0 / theta)
    L = 200.0 * big if theta < 2 else 20.0 * big
    h_target = 0.1 * small
    N = 2 ** int(np.ceil(np.log2(2 * L / h_target)))
    cap = {1: 2 ** 20, 2: 2 ** 11, 3: 2 ** 7}[d]
    return GridSpec(d, L, min(max(N, 64), cap))


def time_difference_decay(theta, s_values, grid=None, d=1):
    """``D(s) = ||G(s + 1/theta) - G(s)||_{L^1}`` for each ``s`` (rectangle rule)."""
    theta = check_theta(theta)
    s_values = np.asarray(s_values, dtype=float)
    if np.any(s_values <= 0):
        raise ValueError("s values must be positive")
    if grid is None:
        grid = default_decay_grid(theta, s_values, d)
    D = np.empty_like(s_values)
    for i, s in enumerate(s_values):
        diff = heat_kernel_values(theta, s + 1.0 / theta, grid) - heat_kernel_values(theta, s, grid)
        D[i] = np.sum(np.abs(diff)) * grid.cell_volume
    return TimeDifferenceTable(theta, s_values, D)
