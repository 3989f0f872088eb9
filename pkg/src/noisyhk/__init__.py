"""Noisy Hegselmann-Krause opinion dynamics: agent simulation, mean-field density
solver, stability theory and phase-diagram sweeps on the periodic unit interval."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    AgentState,
    ClusterSet,
    ModelParams,
    detect_clusters,
    disordered_reference,
    order_parameter,
    periodic_distance,
    seeded_stream,
)
from .sde import Trajectory, cluster_moment_prediction, drift, simulate, step  # noqa: E402
from .spectral import (  # noqa: E402
    SolverConfig,
    SpectralDensity,
    evolve,
    interaction_multiplier,
    measure_mode_growth,
    semi_implicit_step,
)
from .stability import (  # noqa: E402
    F_gamma_d,
    classify_phase_region,
    critical_sigma_clustered,
    critical_sigma_disordered,
    dispersion_growth_rate,
    expected_cluster_count,
    f_gamma,
    most_unstable_s,
)
from .steady_state import asymptotic_profile, fixed_point_residual, kernel_K, multi_cluster_profile  # noqa: E402

__all__ = [
    "AgentState", "ClusterSet", "ModelParams", "detect_clusters", "disordered_reference", "order_parameter",
    "periodic_distance", "seeded_stream", "Trajectory", "cluster_moment_prediction", "drift", "simulate", "step",
    "SolverConfig", "SpectralDensity", "evolve", "interaction_multiplier", "measure_mode_growth",
    "semi_implicit_step", "F_gamma_d", "classify_phase_region", "critical_sigma_clustered",
    "critical_sigma_disordered", "dispersion_growth_rate", "expected_cluster_count", "f_gamma", "most_unstable_s",
    "asymptotic_profile", "fixed_point_residual", "kernel_K", "multi_cluster_profile",
]
