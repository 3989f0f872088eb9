import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from noisyhk.steady_state import (
    AsymmetricInputError,
    ClusterProfile,
    ClustersInteractError,
    analysis_grid,
    asymptotic_profile,
    fixed_point_map,
    fixed_point_residual,
    kernel_K,
    kernel_K_quadrature,
    multi_cluster_profile,
    profile_normalization,
    residual_table,
)

unit = st.floats(-0.5, 0.5, allow_nan=False)


class TestKernel:
    @settings(max_examples=300, deadline=None)
    @given(unit, unit, st.floats(0.01, 0.24))
    def test_matches_quadrature(self, x, y, R):
        assert kernel_K(x, y, R) == pytest.approx(kernel_K_quadrature(x, y, R), abs=1e-10)

    def test_vanishes_at_origin(self):
        y = np.linspace(-0.5, 0.5, 11)
        np.testing.assert_array_equal(kernel_K(0.0, y, 0.1), 0.0)

    @pytest.mark.parametrize("x", [0.2, -0.2, 0.05, -0.05, 0.3])
    def test_continuous_in_y_across_branches(self, x):
        R, e = 0.1, 1e-9
        for b in (x - R, x + R, -R, R):
            assert kernel_K(x, b - e, R) == pytest.approx(kernel_K(x, b + e, R), abs=1e-7)

    def test_continuous_in_x_at_two_R(self):
        R, e = 0.1, 1e-9
        for y in np.linspace(-0.5, 0.5, 41):
            for x0 in (2 * R, -2 * R):
                assert kernel_K(x0 - e, y, R) == pytest.approx(kernel_K(x0 + e, y, R), abs=1e-7)

    def test_vectorised_shape(self):
        x = analysis_grid(16)
        assert kernel_K(x[:, None], x[None, :], 0.1).shape == (17, 17)


class TestProfile:
    @pytest.mark.parametrize("R,sigma", [(0.1, 0.02), (0.2, 0.05), (0.05, 0.01)])
    def test_unit_mass(self, R, sigma):
        prof = ClusterProfile.build(0.3, R, sigma)
        mass, _ = integrate.quad(prof, 0, 1, points=[0.3 - R, 0.3, 0.3 + R], limit=400, epsabs=1e-12)
        assert mass == pytest.approx(1.0, abs=1e-9)

    def test_shape(self):
        R, s = 0.1, 0.02
        C = profile_normalization(R, s)
        assert asymptotic_profile(0.5, 0.5, R, s) == pytest.approx(C)
        assert asymptotic_profile(0.0, 0.5, R, s) == pytest.approx(C * math.exp(-(R / s) ** 2))

    def test_rejects_zero_noise(self):
        with pytest.raises(ValueError):
            profile_normalization(0.1, 0.0)


class TestResidual:
    def test_exact_for_small_noise(self):
        x = analysis_grid(2048)
        rho = asymptotic_profile(x, 0.0, 0.1, 0.01)
        assert fixed_point_residual(rho, 0.1, 0.01) < 1e-10 * rho.max()

    def test_grows_with_noise(self):
        rows = residual_table([0.04, 0.02, 0.01], 0.1, n=1024)
        rel = [r[1] for r in rows]
        assert rel[0] > rel[1] > rel[2]

    def test_rejects_bad_input(self):
        x = analysis_grid(64)
        rho = asymptotic_profile(x, 0.0, 0.1, 0.02)
        with pytest.raises(ValueError):
            fixed_point_residual(rho[:-1], 0.1, 0.02)
        with pytest.raises(AsymmetricInputError, match="asymmetric input"):
            fixed_point_residual(asymptotic_profile(x, 0.1, 0.1, 0.02), 0.1, 0.02)
        with pytest.raises(ValueError):
            fixed_point_residual(-rho, 0.1, 0.02)

    def test_map_preserves_center_value(self):
        x = analysis_grid(64)
        rho = asymptotic_profile(x, 0.0, 0.1, 0.03)
        assert fixed_point_map(rho, 0.1, 0.03)[32] == pytest.approx(rho[32])

    def test_odd_grid_required(self):
        with pytest.raises(ValueError):
            analysis_grid(15)


class TestMultiCluster:
    def test_normalised_mixture(self):
        x = np.arange(4096) / 4096
        rho = multi_cluster_profile([0.2, 0.7], 0.05, 0.02, x=x)
        assert rho.mean() == pytest.approx(1.0, abs=1e-6)
        assert rho[int(0.2 * 4096)] == pytest.approx(rho[int(0.7 * 4096)])

    def test_weights(self):
        x = np.arange(2048) / 2048
        rho = multi_cluster_profile([0.25, 0.75], 0.05, 0.02, x=x, weights=[3, 1])
        p = math.exp(-((0.05 / 0.02) ** 2))  # each plateau reaches the other centre
        assert rho[512] / rho[1536] == pytest.approx((3 + p) / (1 + 3 * p), rel=1e-12)

    def test_interacting(self):
        with pytest.raises(ClustersInteractError, match="clusters interact"):
            multi_cluster_profile([0.2, 0.28], 0.05, 0.02)
        with pytest.raises(ClustersInteractError):
            multi_cluster_profile([0.02, 0.95], 0.05, 0.02)
        with pytest.raises(ValueError):
            multi_cluster_profile([], 0.05, 0.02)


def test_profile_residual_within_calibrated_threshold():
    R, sigma = 0.1, 0.02
    x = analysis_grid(2048)
    rho = asymptotic_profile(x, 0.0, R, sigma)
    assert fixed_point_residual(rho, R, sigma) <= 0.05 * asymptotic_profile(0.0, 0.0, R, sigma)
