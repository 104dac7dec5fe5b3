"""Energy functionals, norms, the diamagnetic check and the symmetry distance."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rotwave.functionals import (
    ModelParams,
    check_diamagnetic,
    evaluate,
    gauge_translate,
    ground_gaussian,
    magnetic_hamiltonian,
    norm_equivalence_constants,
    sigma_gamma_norm,
    symmetry_distance,
)
from rotwave.grid import GridSpec, build_grid, fourier_shift, inner, random_smooth_field


class TestModelParams:
    def test_regimes(self):
        assert ModelParams(dim=2, p=3.0, omega=0.0).regime == "critical"
        assert ModelParams(dim=2, p=2.0, omega=0.0).regime == "subcritical"
        assert ModelParams(dim=3, p=3.0, omega=0.0, gamma_rest=(1.0,)).regime == "supercritical"

    def test_omega0(self):
        assert ModelParams(dim=3, p=2.0, omega=0.0, gamma_rest=(2.0,)).omega0 == 2.0

    @pytest.mark.parametrize(
        "kw",
        [
            dict(dim=2, p=1.0, omega=0.0),
            dict(dim=3, p=5.0, omega=0.0, gamma_rest=(1.0,)),
            dict(dim=3, p=2.0, omega=0.0),
            dict(dim=2, p=2.0, omega=1.5),
            dict(dim=2, p=2.0, omega=0.0, gamma_perp=-1.0),
            dict(dim=2, p=2.0, omega=1.0, gamma_perp2=1.5),
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)

    def test_critical_rotation_allowed(self):
        assert ModelParams(dim=2, p=2.0, omega=1.0).critical


class TestEnergy:
    def test_gaussian_two_gamma(self):
        g = build_grid(GridSpec.uniform(2, 8.0, 256))
        P = ModelParams(dim=2, p=3.0, omega=1.0)
        e = evaluate(ground_gaussian(g, P, 1.0), P)
        assert 2 * e.magnetic_kinetic == pytest.approx(2.0, abs=1e-8)

    def test_gaussian_eigenvalue_3d(self, grid3):
        P = ModelParams(dim=3, p=2.0, omega=0.0, gamma_rest=(2.0,), interaction_on=False)
        e = evaluate(ground_gaussian(grid3, P, 1.0), P)
        assert e.mass == pytest.approx(1.0, abs=1e-12)
        assert e.kinetic + e.potential_full == pytest.approx(2.0, rel=1e-10)

    def test_zero_field(self, grid2, params2):
        e = evaluate(grid2.zeros(), params2)
        assert all(v == 0 for v in e.to_dict().values())

    def test_breakdown_relations(self, grid2, rng, params2):
        f = random_smooth_field(grid2, rng)
        e = evaluate(f, params2)
        assert e.E_rot == pytest.approx(e.kinetic + e.potential_full - e.angular - e.interaction)
        assert e.E_mag == pytest.approx(e.magnetic_kinetic + e.potential_partial - e.interaction)
        assert e.H_gamma == pytest.approx(2 * e.magnetic_kinetic + 2 * e.potential_partial)
        assert e.angular_im_residual < 1e-9 * e.mass

    def test_completion_of_square(self, grid2_fine, rng):
        P = ModelParams(dim=2, p=3.0, omega=1.0)
        for _ in range(5):
            e = evaluate(random_smooth_field(grid2_fine, rng), P)
            assert e.E_rot == pytest.approx(e.E_mag, rel=1e-11)

    def test_hamiltonian_pairing_and_symmetry(self, grid3, rng):
        P = ModelParams(dim=3, p=2.0, omega=1.0, gamma_rest=(1.5,))
        f, h = random_smooth_field(grid3, rng), random_smooth_field(grid3, rng)
        e = evaluate(f, P)
        Hf = f.with_values(magnetic_hamiltonian(f.values, grid3, P))
        Hh = h.with_values(magnetic_hamiltonian(h.values, grid3, P))
        assert inner(f, Hf).real == pytest.approx(e.magnetic_kinetic + e.potential_partial, rel=1e-12)
        assert inner(h, Hf) == pytest.approx(inner(Hh, f), rel=1e-11)

    def test_to_json(self, grid2, params2):
        e = evaluate(ground_gaussian(grid2, params2, 1.0), params2)
        assert '"H_gamma"' in e.to_json()


class TestSigmaNorm:
    def test_gaussian_value(self):
        g = build_grid(GridSpec.uniform(2, 8.0, 128))
        P = ModelParams(dim=2, p=3.0, omega=0.0)
        assert sigma_gamma_norm(ground_gaussian(g, P, 1.0), P) == pytest.approx(3.0, rel=1e-12)

    def test_zero_and_homogeneity(self, grid2, rng, params2):
        assert sigma_gamma_norm(grid2.zeros(), params2) == 0.0
        f = random_smooth_field(grid2, rng)
        assert sigma_gamma_norm(2 * f, params2) == pytest.approx(4 * sigma_gamma_norm(f, params2), rel=1e-13)


class TestNormEquivalence:
    def test_planar_constants(self):
        C = norm_equivalence_constants(ModelParams(dim=2, p=3.0, omega=0.5))
        assert (C.C1, C.C2) == pytest.approx((3.25, 0.375))

    def test_three_dim_constants(self):
        C = norm_equivalence_constants(ModelParams(dim=3, p=2.0, omega=0.5, gamma_rest=(2.0,)))
        assert (C.C1, C.C2) == pytest.approx((6.0, 0.375))

    def test_critical_rotation_rejected(self):
        with pytest.raises(ValueError, match="omega < gamma"):
            norm_equivalence_constants(ModelParams(dim=2, p=3.0, omega=1.0))


class TestDiamagnetic:
    def test_real_nonnegative_equality(self, grid2_fine):
        g = grid2_fine
        P = ModelParams(dim=2, p=3.0, omega=0.0, gamma_perp=1e-12)
        rep = check_diamagnetic(g.field(np.exp(-g.r_squared / 2)), P)
        assert rep.passed and rep.max_excess < 1e-12

    def test_vortex_strict(self, grid2_fine):
        g = grid2_fine
        P = ModelParams(dim=2, p=3.0, omega=1.0)
        rep = check_diamagnetic(g.field((g.x(0) + 1j * g.x(1)) * np.exp(-g.r_squared / 2)), P)
        assert rep.passed and rep.min_slack > 0

    def test_random_fields(self, grid2, rng, params2):
        for _ in range(10):
            assert check_diamagnetic(random_smooth_field(grid2, rng), params2).passed


@pytest.fixture(scope="module")
def setup():
    g = build_grid(GridSpec.uniform(2, 8.0, 64))
    P = ModelParams(dim=2, p=3.0, omega=1.0)
    phi = g.field((1 + 0.3 * g.x(0) + 0.2j * g.x(1)) * np.exp(-g.r_squared / 2))
    return g, P, phi


class TestSymmetryDistance:
    def test_identity(self, setup):
        g, P, phi = setup
        d, y = symmetry_distance(phi, phi, P)
        assert d < 1e-10 and np.hypot(*y) < 1e-8

    def test_gauged_shift_and_phase(self, setup):
        g, P, phi = setup
        u = gauge_translate(phi, (-1.0, 0.0), P.gamma_perp) * np.exp(0.7j)
        d, y = symmetry_distance(u, phi, P)
        assert d < 1e-8
        np.testing.assert_allclose(y, (1.0, 0.0), atol=1e-6)

    def test_ungauged_shift_is_far(self, setup):
        g, P, phi = setup
        u = phi.with_values(fourier_shift(phi.values, g, (1.0, 0.0)))
        d, _ = symmetry_distance(u, phi, P)
        assert d > 0.01 * np.sqrt(sigma_gamma_norm(phi, P))

    @settings(max_examples=10, deadline=None)
    @given(y1=st.floats(-1.5, 1.5), y2=st.floats(-1.5, 1.5))
    def test_gauge_translation_preserves_energy(self, setup, y1, y2):
        g, P, phi = setup
        a, b = evaluate(phi, P), evaluate(gauge_translate(phi, (y1, y2), P.gamma_perp), P)
        assert b.E_mag == pytest.approx(a.E_mag, rel=1e-8)
        assert b.mass == pytest.approx(a.mass, rel=1e-10)
