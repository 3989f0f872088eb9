import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisyhk.core import (
    AgentState,
    ModelParams,
    circular_mean,
    derive_seed,
    detect_clusters,
    disordered_reference,
    order_parameter,
    periodic_distance,
    seeded_stream,
    signed_displacement,
    wrap,
)

positions = st.lists(st.floats(0, 1, exclude_max=True, allow_nan=False), min_size=1, max_size=60)


def brute_force_Q(x, R, L=1.0):
    """O(N^2) pair count, diagonal included."""
    x = np.asarray(x)
    d = np.abs(x[:, None] - x[None, :])
    d = np.minimum(d, L - d)
    return float(np.mean(d <= R + 1e-12))


class TestModelParams:
    def test_defaults(self):
        p = ModelParams()
        assert (p.N, p.R, p.sigma, p.L, p.h) == (100, 0.1, 0.05, 1.0, 1e-2)

    @pytest.mark.parametrize("bad", [dict(N=0), dict(R=0), dict(R=0.6), dict(sigma=-1), dict(h=0), dict(L=-1),
                                     dict(N=2.5), dict(seed=-1)])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            ModelParams(**bad)

    def test_gamma(self):
        assert ModelParams(R=0.05, sigma=0.005).gamma == pytest.approx(0.05)

    def test_with(self):
        assert ModelParams().with_(sigma=0.2).sigma == 0.2


class TestGeometry:
    def test_wrap_range(self):
        y = wrap(np.array([-1e-18, -0.25, 1.0, 2.75]))
        assert np.all((y >= 0) & (y < 1))
        np.testing.assert_allclose(y, [0.0, 0.75, 0.0, 0.75])

    def test_signed_displacement_antipode(self):
        assert signed_displacement(0.0, 0.5) == 0.5
        assert signed_displacement(0.9, 0.1) == pytest.approx(0.2)
        assert signed_displacement(0.1, 0.9) == pytest.approx(-0.2)

    @given(st.floats(-3, 3), st.floats(-3, 3))
    def test_signed_displacement_matches_distance(self, a, b):
        d = signed_displacement(a, b)
        assert -0.5 < d <= 0.5
        assert abs(d) == pytest.approx(periodic_distance(a, b), abs=1e-12)

    def test_circular_mean_across_seam(self):
        assert periodic_distance(circular_mean([0.95, 0.05]), 0.0) < 1e-12

    def test_agent_state_validate(self):
        with pytest.raises(ValueError):
            AgentState(np.array([0.2, 1.0])).validate()
        AgentState(np.array([0.0, 0.999])).validate()


class TestOrderParameter:
    @settings(max_examples=60, deadline=None)
    @given(positions, st.floats(0.01, 0.49))
    def test_matches_brute_force(self, x, R):
        assert order_parameter(x, R) == pytest.approx(brute_force_Q(x, R), abs=1e-12)

    def test_all_coincident(self):
        assert order_parameter(np.full(50, 0.3), 0.01) == 1.0

    def test_half_circle(self):
        assert order_parameter(np.random.default_rng(0).random(30), 0.5) == 1.0

    def test_grid_aligned_ties_count(self):
        x = np.arange(10) / 10
        # neighbours at exactly R = 0.1 are in range
        assert order_parameter(x, 0.1) == pytest.approx(30 / 100)

    def test_uniform_limit(self):
        x = seeded_stream(3).random(4000)
        assert order_parameter(x, 0.1) == pytest.approx(disordered_reference(4000, 0.1), abs=0.01)

    def test_empty(self):
        with pytest.raises(ValueError, match="no agents"):
            order_parameter([], 0.1)


class TestClusters:
    def test_two_groups_across_seam(self):
        x = np.array([0.98, 0.99, 0.01, 0.5, 0.51])
        cs = detect_clusters(x, 0.1)
        assert len(cs) == 2
        assert sorted(cs.sizes) == [2, 3]
        seam = [c for c in cs if c.size == 3][0]
        assert periodic_distance(seam.center, 0.9933) < 1e-3
        assert seam.width == pytest.approx(0.03)
        assert sum(c.mass for c in cs) == pytest.approx(1.0)

    def test_single_cluster_span(self):
        cs = detect_clusters(np.array([0.2, 0.25, 0.3]), 0.1)
        assert len(cs) == 1 and cs.widths[0] == pytest.approx(0.1)

    @given(positions, st.floats(0.001, 0.3))
    def test_partition(self, x, thr):
        cs = detect_clusters(x, thr)
        members = np.sort(np.concatenate([c.members for c in cs]))
        np.testing.assert_array_equal(members, np.arange(len(x)))

    def test_errors(self):
        with pytest.raises(ValueError, match="no agents"):
            detect_clusters([], 0.1)
        with pytest.raises(ValueError):
            detect_clusters([0.1], 0.0)


class TestSeeding:
    def test_streams_reproducible_and_independent(self):
        a = seeded_stream(7, 0).random(5)
        np.testing.assert_array_equal(a, seeded_stream(7, 0).random(5))
        assert not np.allclose(a, seeded_stream(7, 1).random(5))
        assert not np.allclose(a, seeded_stream(8, 0).random(5))

    def test_derive_seed(self):
        s = derive_seed(0, 1, 2, 0)
        assert s == derive_seed(0, 1, 2, 0)
        assert 0 <= s < 2**64
        assert len({derive_seed(0, i, j, 0) for i in range(5) for j in range(5)}) == 25
