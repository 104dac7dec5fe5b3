"""Spectral grid, fields and Fourier operators."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotwave.grid import (
    ComplexField,
    GridSpec,
    NonFiniteFieldError,
    apply_angular_operator,
    boundary_mass,
    build_grid,
    dealias,
    fourier_derivative,
    fourier_shift,
    inner,
    integrate,
    magnetic_gradient,
    random_smooth_field,
)


class TestGridSpec:
    def test_uniform_16(self):
        g = build_grid(GridSpec.uniform(2, 8.0, 16))
        assert g.size == 256
        assert g.spacing == pytest.approx((1.0, 1.0))
        k = np.sort(g.wavenumbers[0])
        assert k[0] == pytest.approx(-np.pi)
        assert k[-1] == pytest.approx(np.pi - np.pi / 8)

    def test_3d_cell_volume(self):
        g = build_grid(GridSpec.uniform(3, 8.0, 64))
        assert g.size == 262144
        assert g.quad_weight == pytest.approx(0.25**3)

    @pytest.mark.parametrize("n", [6, 4, 12, 100])
    def test_rejects_bad_points(self, n):
        with pytest.raises(ValueError, match="power of two"):
            GridSpec.uniform(2, 8.0, n)

    def test_rejects_bad_dim_and_width(self):
        with pytest.raises(ValueError):
            GridSpec.uniform(4, 8.0, 16)
        with pytest.raises(ValueError):
            GridSpec.uniform(2, 0.0, 16)

    def test_coords_centered(self):
        g = build_grid(GridSpec(2, (4.0, 8.0), (16, 32)))
        for j in range(2):
            c = g.coords[j]
            assert c[0] == pytest.approx(-g.half_widths[j])
            np.testing.assert_allclose(np.diff(c), g.spacing[j])

    def test_equality_by_spec(self):
        a = build_grid(GridSpec.uniform(2, 8.0, 16))
        b = build_grid(GridSpec.uniform(2, 8.0, 16))
        assert a == b and hash(a) == hash(b)


class TestComplexField:
    def test_rejects_nonfinite(self, grid2):
        vals = np.zeros(grid2.shape, complex)
        vals[0, 0] = np.nan
        with pytest.raises(NonFiniteFieldError):
            ComplexField(grid2, vals)

    def test_rejects_wrong_shape(self, grid2):
        with pytest.raises(ValueError):
            ComplexField(grid2, np.zeros((3, 3)))

    def test_values_read_only(self, grid2):
        f = grid2.zeros()
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0

    def test_normalized_mass(self, grid2):
        f = grid2.field(np.exp(-grid2.r_squared))
        assert f.normalized(3.0).mass() == pytest.approx(3.0, rel=1e-14)


class TestDerivatives:
    def test_gaussian_derivative(self, grid2_fine):
        g = grid2_fine
        f = g.field(np.exp(-g.r_squared / 2))
        d = fourier_derivative(f, 0).values
        exact = -g.x(0) * np.exp(-g.r_squared / 2)
        err = np.sqrt(integrate(np.abs(d - exact) ** 2, g) / integrate(exact**2, g))
        assert err < 1e-10

    def test_constant_has_zero_derivative(self, grid2):
        f = grid2.field(np.full(grid2.shape, 2.0 + 0j))
        assert np.max(np.abs(fourier_derivative(f, 1).values)) < 1e-13

    def test_single_mode_exact(self, grid2):
        L = grid2.half_widths[0]
        f = grid2.field(np.sin(np.pi * grid2.x(0) / L) + 0 * grid2.x(1))
        exact = (np.pi / L) * np.cos(np.pi * grid2.x(0) / L)
        assert np.max(np.abs(fourier_derivative(f, 0).values - exact)) < 1e-13

    def test_magnetic_gradient_zero_gamma(self, grid2, rng):
        f = random_smooth_field(grid2, rng)
        for a, b in zip(magnetic_gradient(f, 0.0), [fourier_derivative(f, j) for j in range(2)]):
            np.testing.assert_allclose(a.values, b.values, atol=1e-14)


class TestAngularOperator:
    def test_radial_in_kernel(self, grid2_fine):
        g = grid2_fine
        f = g.field(np.exp(-g.r_squared / 2))
        assert np.max(np.abs(apply_angular_operator(f).values)) < 1e-10

    @pytest.mark.parametrize("sign", [1, -1])
    def test_vortex_eigenfunction(self, grid2_fine, sign):
        g = grid2_fine
        f = g.field((g.x(0) + sign * 1j * g.x(1)) * np.exp(-g.r_squared / 2))
        Lf = apply_angular_operator(f).values
        assert np.max(np.abs(Lf - sign * f.values)) < 1e-10


class TestIntegration:
    def test_gaussian_integral(self, grid2):
        assert integrate(np.exp(-grid2.r_squared), grid2) == pytest.approx(np.pi, rel=1e-12)

    def test_zero_density(self, grid2):
        assert integrate(np.zeros(grid2.shape), grid2) == 0.0

    def test_inner_hermitian(self, grid2, rng):
        f, h = random_smooth_field(grid2, rng), random_smooth_field(grid2, rng)
        assert inner(f, h) == pytest.approx(np.conj(inner(h, f)), rel=1e-13)

    def test_boundary_mass(self, grid2):
        center = grid2.field(np.exp(-grid2.r_squared))
        assert boundary_mass(center) < 1e-20
        edge = grid2.field(np.exp(-((grid2.x(0) - 7.5) ** 2) - grid2.x(1) ** 2))
        assert boundary_mass(edge) > 0.4


class TestShiftsAndFilters:
    def test_shift_gaussian(self, grid2_fine):
        g = grid2_fine
        f = np.exp(-g.r_squared / 2)
        s = fourier_shift(f, g, (0.7, -1.3))
        exact = np.exp(-((g.x(0) + 0.7) ** 2 + (g.x(1) - 1.3) ** 2) / 2)
        # periodic wrap of the Gaussian tail, exp(-(8 - 1.3)^2 / 2) ~ 2e-10
        assert np.max(np.abs(s - exact)) < 1e-9

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(-2, 2), b=st.floats(-2, 2))
    def test_shifts_compose(self, a, b):
        g = build_grid(GridSpec.uniform(2, 8.0, 32))
        f = np.exp(-g.r_squared)
        two = fourier_shift(fourier_shift(f, g, (a, 0.0)), g, (b, 0.0))
        one = fourier_shift(f, g, (a + b, 0.0))
        np.testing.assert_allclose(two, one, atol=1e-12)

    def test_random_field_band_limited(self, grid2, rng):
        f = random_smooth_field(grid2, rng, band=0.25)
        assert np.allclose(dealias(f, 0.25).values, f.values, atol=1e-12)
