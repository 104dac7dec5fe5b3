"""Radial ground profile, critical mass and sharp Gagliardo-Nirenberg constants."""

import json

import numpy as np
import pytest

from rotwave.grid import GridSpec, build_grid
from rotwave.qsolver import (
    critical_mass,
    gn_quotient,
    gradient_flow_critical_mass,
    sharp_gn_constant,
    solve_ground_profile,
    sphere_area,
    write_profile,
)

# verified against the independent gradient-flow oracle (relative gap 2e-7)
M_Q_2D = 5.850448262284132


@pytest.fixture(scope="module", params=[(2, 4.0), (3, 10.0 / 3.0), (3, 4.0)])
def profile(request):
    return solve_ground_profile(*request.param)


class TestProfile:
    def test_pohozaev(self, profile):
        assert max(profile.pohozaev_residuals) < 1e-6

    def test_positive_decreasing(self, profile):
        assert np.all(profile.values > 0)
        assert np.all(np.diff(profile.values) < 0)

    def test_tail_decay(self, profile):
        assert profile(np.array([30.0]))[0] < 1e-10 * profile.w0

    def test_interpolant_matches_nodes(self, profile):
        np.testing.assert_allclose(profile(profile.r_nodes[::50]), profile.values[::50], rtol=1e-12)


class TestCriticalMass:
    def test_planar_value(self):
        assert critical_mass(2) == pytest.approx(M_Q_2D, rel=1e-10)
        assert solve_ground_profile(2, 4.0).w0 > 1

    def test_gradient_flow_oracle(self):
        g = build_grid(GridSpec.uniform(2, 16.0, 256))
        assert gradient_flow_critical_mass(g) == pytest.approx(M_Q_2D, rel=1e-3)

    @pytest.mark.parametrize("N", [2, 3])
    def test_critical_constant_identity(self, N):
        M = critical_mass(N)
        assert sharp_gn_constant(N, 2 + 4 / N) == pytest.approx((N + 2) / (2 * N) * M ** (-2 / N), rel=1e-6)

    def test_unit_mass_pohozaev(self):
        prof = solve_ground_profile(2, 4.0)
        assert prof.grad_sq / prof.mass == pytest.approx(2.0, rel=1e-8)
        assert prof.grad_sq == pytest.approx(prof.lp_norm, rel=1e-8)

    def test_inverse_mass(self):
        assert sharp_gn_constant(2, 4.0) == pytest.approx(0.1709, abs=5e-5)


class TestGNConstant:
    def test_gaussian_below_sharp(self):
        # unit Gaussian in 2D: |grad f|^2 = 1, mass = 1, |f|_4^4 = 1/(2 pi)
        q = gn_quotient(2, 4.0, 1.0, 1.0, 1.0 / (2 * np.pi))
        assert q < sharp_gn_constant(2, 4.0)

    def test_stable_under_refinement(self):
        base = solve_ground_profile(3, 4.0)
        fine = solve_ground_profile(3, 4.0, r_max=60.0, mesh_points=8001)
        assert fine.gn_constant == pytest.approx(base.gn_constant, rel=1e-6)

    @pytest.mark.parametrize("args", [(2, 2.0), (3, 6.0), (3, 1.5)])
    def test_rejects_exponent(self, args):
        with pytest.raises(ValueError):
            solve_ground_profile(*args)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * np.pi)
    assert sphere_area(3) == pytest.approx(4 * np.pi)


def test_write_profile(tmp_path):
    paths = write_profile(solve_ground_profile(2, 4.0), tmp_path / "q")
    assert [p.suffix for p in paths] == [".csv", ".json"]
    cert = json.loads(paths[1].read_text())
    assert cert["mass"] == pytest.approx(M_Q_2D, rel=1e-10)
    assert paths[0].read_text().splitlines()[0] == "r,W"
