"""Cross-checks between the agent simulator, the density solver and the steady-state theory."""

import numpy as np
import pytest

from noisyhk.core import ModelParams, order_parameter
from noisyhk.sde import simulate
from noisyhk.spectral import (
    SolverConfig,
    SpectralDensity,
    density_clusters,
    density_order_parameter,
    evolve,
    forward_transform,
)
from noisyhk.steady_state import multi_cluster_profile


def test_agents_track_density_in_nonlinear_regime():
    # many agents from a common bump follow the mean-field order parameter while
    # the bump dissolves (Q falls from 1 towards 2R over this window)
    R, sigma, T = 0.2, 0.1, 40.0
    params = ModelParams(N=1000, R=R, sigma=sigma, seed=1)
    traj = simulate(params, T, init="gaussian(0.5, 0.05)", record_stride=500)
    q_sde = np.mean([order_parameter(x, R) for x in traj.window(20.0).positions])

    cfg = SolverConfig()
    # the agent start has std 0.05, i.e. rho ~ exp(-(x - 0.5)^2 / (2 * 0.05^2))
    q_pde = []
    evolve("gaussian(0.5, 200)", cfg, params, T, record_every=5.0,
           callback=lambda s: q_pde.append(density_order_parameter(s, R)) if s.t >= 20 - 1e-9 else None)
    # finite-N corrections to Q are O(1/N) plus sampling noise
    assert 0.45 < np.mean(q_pde) < 0.65
    assert q_sde == pytest.approx(np.mean(q_pde), abs=0.03)


def test_separated_clusters_are_stationary():
    R, sigma = 0.05, 0.02
    cfg = SolverConfig(m=128)
    rho = multi_cluster_profile([0.2, 0.7], R, sigma, x=cfg.x)
    state = SpectralDensity(forward_transform(rho / rho.mean(), cfg.m))
    final = evolve(state, cfg, ModelParams(R=R, sigma=sigma), 20.0).final
    cs = density_clusters(final.sample(cfg.grid))
    assert len(cs) == 2
    assert [c.center for c in cs] == pytest.approx([0.2, 0.7], abs=2e-3)


def test_density_order_parameter_disordered_limit():
    params = ModelParams(R=0.1, sigma=0.2)
    res = evolve("uniform-plus-noise(1e-3)", SolverConfig(m=32), params, 2.0)
    assert density_order_parameter(res.final, 0.1) == pytest.approx(0.2, abs=1e-6)
