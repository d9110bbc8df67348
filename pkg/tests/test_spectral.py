import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracddp.exceptions import QuadratureError
from fracddp.spectral import (
    Field,
    GridSpec,
    dealiased_product,
    divergence,
    fractional_laplacian,
    fractional_laplacian_constant,
    fractional_laplacian_direct_1d,
    gradient,
    half_laplacian_inverse,
    laplacian,
    padded_product,
    perp_gradient,
    poisson_solve,
    spectral_interpolate,
)


def band_limited(grid, rng, kmax=4):
    """Random real field with modes |j| <= kmax on each axis."""
    c = np.zeros(grid.spectral_shape, dtype=complex)
    sl = tuple([slice(None)] * (grid.d - 1) + [slice(0, kmax + 1)])
    c[sl] = rng.normal(size=c[sl].shape) + 1j * rng.normal(size=c[sl].shape)
    for axis in range(grid.d - 1):
        kill = [slice(None)] * grid.d
        kill[axis] = slice(kmax + 1, grid.N - kmax)
        c[tuple(kill)] = 0
    vals = grid.ifft(c)
    return Field(grid, vals / np.max(np.abs(vals)))


class TestGrid:
    def test_derived_quantities(self):
        g = GridSpec(2, 3.0, 16)
        assert g.h == pytest.approx(6.0 / 16)
        assert g.shape == (16, 16)
        assert g.size == 256
        assert g.x[0] == -3.0 and g.x[-1] == pytest.approx(3.0 - g.h)
        assert np.allclose(g.k[:3], np.pi / 3.0 * np.arange(3))

    def test_zero_wavenumber_once_per_axis(self):
        g = GridSpec(1, 2.0, 32)
        assert np.sum(g.k == 0) == 1
        assert g.k.min() == pytest.approx(-np.pi / 2.0 * 16)

    @pytest.mark.parametrize("bad", [dict(d=4, L=1, N=8), dict(d=1, L=0, N=8), dict(d=1, L=1, N=7)])
    def test_rejects_invalid(self, bad):
        with pytest.raises(ValueError):
            GridSpec(**bad)

    def test_field_validation(self):
        g = GridSpec(1, 1.0, 8)
        with pytest.raises(ValueError):
            Field(g, np.zeros(7))
        with pytest.raises(ValueError):
            Field(g, np.full(8, np.nan))
        f = Field(g, np.arange(8.0))
        assert f.flat().shape == (8,)

    def test_row_major_layout(self):
        g = GridSpec(2, 1.0, 4)
        f = Field.from_function(g, lambda x1, x2: x1 + 10 * x2)
        flat = f.flat()
        # second coordinate varies fastest
        assert flat[1] - flat[0] == pytest.approx(10 * g.h)


class TestFractionalLaplacian:
    def test_constant_maps_to_zero(self):
        g = GridSpec(2, 5.0, 32)
        out = fractional_laplacian(Field(g, np.full(g.shape, 3.0)), 0.7)
        assert np.max(np.abs(out.values)) < 1e-14

    def test_sine_theta_two(self):
        L = 4.0
        g = GridSpec(1, L, 64)
        f = Field.from_function(g, lambda x: np.sin(np.pi * x / L))
        out = fractional_laplacian(f, 2.0)
        assert np.allclose(out.values, (np.pi / L) ** 2 * f.values, atol=1e-12)

    def test_cosine_single_mode(self):
        L = 3.0
        g = GridSpec(1, L, 64)
        f = Field.from_function(g, lambda x: np.cos(2 * np.pi * x / L))
        out = fractional_laplacian(f, 1.5)
        assert np.allclose(out.values, (2 * np.pi / L) ** 1.5 * f.values, atol=1e-12)

    def test_theta_two_matches_laplacian_composition(self):
        rng = np.random.default_rng(1)
        g = GridSpec(2, 2.0, 32)
        f = band_limited(g, rng, 6)
        lap = divergence(gradient(f))
        out = fractional_laplacian(f, 2.0)
        assert np.max(np.abs(out.values + lap.values)) <= 1e-10 * np.max(np.abs(out.values))
        assert np.allclose(laplacian(f).values, lap.values, atol=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(theta=st.floats(0.05, 2.0), seed=st.integers(0, 10 ** 6))
    def test_positive_semidefinite(self, theta, seed):
        g = GridSpec(2, 3.0, 16)
        f = Field(g, np.random.default_rng(seed).normal(size=g.shape))
        assert g.integrate(f.values * fractional_laplacian(f, theta).values) >= -1e-12

    def test_semigroup_of_multipliers(self):
        L = 2.0
        g = GridSpec(1, L, 32)
        f = Field.from_function(g, lambda x: np.cos(3 * np.pi * x / L))
        twice = fractional_laplacian(fractional_laplacian(f, 0.6), 0.9)
        once = fractional_laplacian(f, 1.5)
        assert np.allclose(twice.values, once.values, atol=1e-12)

    def test_rejects_bad_theta(self):
        g = GridSpec(1, 1.0, 8)
        with pytest.raises(ValueError):
            fractional_laplacian(Field.zeros(g), 2.5)
        with pytest.raises(ValueError):
            fractional_laplacian(Field.zeros(g), 0.0)


class TestDirectSingularIntegral:
    def test_constant_constant_is_normalized(self):
        # theta -> 0 limit of the constant tends to 0; theta = 1, d = 1 gives 1/pi
        assert fractional_laplacian_constant(1, 1.0) == pytest.approx(1 / np.pi)
        # d = 3, theta = 2 limit of the formula stays finite only via Gamma(1 - theta/2)
        assert fractional_laplacian_constant(3, 1.0) == pytest.approx(1 / np.pi ** 2)

    def test_constant_function(self):
        val = fractional_laplacian_direct_1d(lambda y: 2.0, 0.5, 0.3)
        assert abs(val) < 1e-10

    def test_cosine_eigenfunction(self):
        val = fractional_laplacian_direct_1d(np.cos, 0.5, 0.0, oscillation_period=2 * np.pi)
        assert val == pytest.approx(1.0, rel=1e-6)

    @pytest.mark.parametrize("theta", [0.3, 0.5, 0.8])
    def test_matches_spectral_on_gaussian(self, theta):
        # periodic images of the algebraic tail fall off like L^{-1-theta}; the box must be wide
        g = GridSpec(1, 2000.0, 2 ** 17)
        f = Field.from_function(g, lambda x: np.exp(-x ** 2))
        spec = fractional_laplacian(f, theta).values
        scale = np.max(np.abs(spec))
        # relative to the sup norm: the output changes sign near |x| = 1.5
        for x0 in (0.0, 0.75, 1.5):
            i = int(round((x0 + g.L) / g.h))
            direct = fractional_laplacian_direct_1d(lambda y: np.exp(-y * y), theta, g.x[i])
            assert abs(direct - spec[i]) <= 1e-4 * scale

    def test_rejects_theta_at_least_one(self):
        with pytest.raises(ValueError):
            fractional_laplacian_direct_1d(np.cos, 1.2, 0.0)

    def test_non_convergence_raises(self):
        with pytest.raises(QuadratureError):
            # growing integrand: the outer integral diverges
            fractional_laplacian_direct_1d(lambda y: math.exp(abs(y)), 0.5, 0.0)
        with pytest.raises(QuadratureError):
            fractional_laplacian_direct_1d(lambda y: y * y, 0.5, 0.0)


class TestDerivatives:
    def test_gradient_of_constant(self):
        g = GridSpec(2, 1.0, 16)
        for c in gradient(Field(g, np.ones(g.shape))):
            assert np.max(np.abs(c.values)) < 1e-14

    def test_sine(self):
        L = 2.5
        g = GridSpec(1, L, 32)
        (d1,) = gradient(Field.from_function(g, lambda x: np.sin(np.pi * x / L)))
        assert np.allclose(d1.values, np.pi / L * np.cos(np.pi * g.x / L), atol=1e-12)

    def test_product_rule(self):
        L = np.pi
        g = GridSpec(2, L, 32)
        f = Field.from_function(g, lambda x, y: np.sin(x) * np.cos(2 * y))
        d1, d2 = gradient(f)
        X, Y = g.coords
        assert np.allclose(d1.values, np.cos(X) * np.cos(2 * Y), atol=1e-10)
        assert np.allclose(d2.values, -2 * np.sin(X) * np.sin(2 * Y), atol=1e-10)

    def test_perp_gradient(self):
        L = 2.0
        g = GridSpec(2, L, 32)
        f = Field.from_function(g, lambda x, y: np.sin(np.pi * x / L) + 0 * y)
        p1, p2 = perp_gradient(f)
        assert np.max(np.abs(p1.values)) < 1e-12
        assert np.allclose(p2.values, np.pi / L * np.cos(np.pi * g.coords[0] / L), atol=1e-12)
        zero = perp_gradient(Field(g, np.ones(g.shape)))
        assert max(np.max(np.abs(c.values)) for c in zero) < 1e-14

    def test_perp_gradient_divergence_free(self):
        rng = np.random.default_rng(7)
        g = GridSpec(2, 3.0, 32)
        f = band_limited(g, rng, 8)
        assert np.max(np.abs(divergence(perp_gradient(f)).values)) < 1e-10

    def test_perp_gradient_requires_2d(self):
        with pytest.raises(ValueError):
            perp_gradient(Field.zeros(GridSpec(1, 1.0, 8)))


class TestInverses:
    def test_poisson_eigenfunction(self):
        L = 3.0
        g = GridSpec(1, L, 64)
        psi = poisson_solve(Field.from_function(g, lambda x: np.cos(np.pi * x / L)))
        assert np.allclose(psi.values, (L / np.pi) ** 2 * np.cos(np.pi * g.x / L), atol=1e-12)

    def test_poisson_constant_gauge(self):
        g = GridSpec(2, 1.0, 16)
        assert np.max(np.abs(poisson_solve(Field(g, np.full(g.shape, 4.0))).values)) < 1e-14

    def test_poisson_residual_and_mean(self):
        rng = np.random.default_rng(3)
        g = GridSpec(2, 2.0, 32)
        rho = Field(g, rng.normal(size=g.shape))
        psi = poisson_solve(rho)
        resid = -laplacian(psi).values - (rho.values - rho.values.mean())
        assert np.max(np.abs(resid)) < 1e-10
        assert abs(psi.values.mean()) <= 1e-14

    def test_half_laplacian_inverse(self):
        L = 2.0
        g = GridSpec(2, L, 32)
        rho = Field.from_function(g, lambda x, y: np.cos(np.pi * x / L) + 0 * y)
        psi = half_laplacian_inverse(rho)
        assert np.allclose(psi.values, -(L / np.pi) * rho.values, atol=1e-12)
        assert np.max(np.abs(half_laplacian_inverse(Field(g, np.ones(g.shape))).values)) < 1e-14

    def test_half_laplacian_round_trip(self):
        rng = np.random.default_rng(5)
        g = GridSpec(2, 2.0, 32)
        rho = Field(g, rng.normal(size=g.shape))
        back = fractional_laplacian(half_laplacian_inverse(rho), 1.0)
        assert np.max(np.abs(back.values + (rho.values - rho.values.mean()))) < 1e-10

    def test_half_laplacian_requires_2d(self):
        with pytest.raises(ValueError):
            half_laplacian_inverse(Field.zeros(GridSpec(1, 1.0, 8)))


class TestProducts:
    def test_times_one_is_truncation(self):
        rng = np.random.default_rng(0)
        g = GridSpec(1, 1.0, 32)
        f = Field(g, rng.normal(size=g.shape))
        out = dealiased_product(f, Field(g, np.ones(g.shape)))
        trunc = g.ifft(f.hat() * g.dealias_mask)
        assert np.allclose(out.values, trunc, atol=1e-13)

    def test_low_modes_exact(self):
        L = np.pi
        g = GridSpec(1, L, 64)
        a = Field.from_function(g, lambda x: np.sin(3 * x))
        b = Field.from_function(g, lambda x: np.cos(5 * x))
        out = dealiased_product(a, b)
        assert np.allclose(out.values, np.sin(3 * g.x) * np.cos(5 * g.x), atol=1e-13)

    @pytest.mark.parametrize("d,N", [(1, 48), (2, 24), (3, 12)])
    def test_matches_padded_oracle(self, d, N):
        rng = np.random.default_rng(d)
        g = GridSpec(d, 1.5, N)
        f = Field(g, rng.normal(size=g.shape))
        h = Field(g, rng.normal(size=g.shape))
        assert np.max(np.abs(dealiased_product(f, h).values - padded_product(f, h).values)) < 1e-12

    def test_mask_cutoff(self):
        g = GridSpec(1, 1.0, 30)
        kept = np.nonzero(g.dealias_mask)[0]
        assert kept.max() == math.ceil(30 / 3) - 1


def test_spectral_interpolation_reproduces_trig_polynomial():
    L = 2.0
    g = GridSpec(2, L, 16)
    f = Field.from_function(g, lambda x, y: np.cos(np.pi * x / L) * np.sin(2 * np.pi * y / L) + 0.3)
    pts = np.linspace(-1.7, 1.3, 7)
    vals = spectral_interpolate(f, [pts, pts])
    X, Y = np.meshgrid(pts, pts, indexing="ij")
    assert np.allclose(vals, np.cos(np.pi * X / L) * np.sin(2 * np.pi * Y / L) + 0.3, atol=1e-12)
