"""Linear stability of the uniform density: dispersion function, critical curves, cluster count."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

GAMMA_CRIT = 1.0 / 3.0

DISORDERED_UNSTABLE = "disordered-unstable"
BISTABLE = "bistable"
CLUSTERED_UNSTABLE = "clustered-unstable"
INDETERMINATE = "indeterminate"


class NoUnstableModeError(ValueError):
    pass


@dataclass(frozen=True)
class DispersionParams:
    gamma: float
    s: float
    d: int = 1

    def __post_init__(self):
        if self.gamma < 0 or self.s < 0 or self.d < 1:
            raise ValueError("need gamma >= 0, s >= 0, d >= 1")


@dataclass(frozen=True)
class PhaseRegion:
    label: str
    sigma_lower: float
    sigma_upper: float


def gamma_of(R: float, sigma: float) -> float:
    return sigma**2 / (4 * R**3)


def f_gamma(s, gamma: float):
    """sin(s)/s - cos(s) - gamma s^2, continuous at s = 0.

    Below s = 1e-4 the first two terms are replaced by their Taylor series
    to avoid cancellation.
    """
    s = np.asarray(s, dtype=float)
    small = s < 1e-4
    safe = np.where(small, 1.0, s)
    s2 = s * s
    series = s2 * (1 / 3 - s2 * (1 / 30 - s2 * (1 / 840 - s2 / 45360)))
    out = np.where(small, series, np.sin(safe) / safe - np.cos(safe)) - gamma * s2
    return float(out) if out.ndim == 0 else out


def most_unstable_s(gamma: float, n_grid: int = 10_000) -> float:
    """Maximiser of f_gamma on (0, 2*pi]: grid scan refined by golden-section search."""
    if gamma >= GAMMA_CRIT:
        raise NoUnstableModeError(f"no unstable mode for gamma={gamma} >= 1/3")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    grid = np.linspace(0.0, 2 * np.pi, n_grid + 1)
    vals = f_gamma(grid, gamma)
    i = int(np.argmax(vals))
    if i == 0:
        # peak sits below the first grid point; f ~ (1/3 - gamma) s^2 - s^4/30 there
        mid = math.sqrt(15 * (GAMMA_CRIT - gamma))
        bracket = (0.0, min(mid, 0.5 * grid[1]), grid[1])
    else:
        bracket = (grid[i - 1], grid[i], grid[min(i + 1, n_grid)])
    if bracket[1] == bracket[2]:
        return float(grid[i])
    res = optimize.minimize_scalar(lambda s: -f_gamma(s, gamma), bracket=bracket, method="golden",
                                   options={"xtol": 1e-12})
    return float(res.x)


def expected_cluster_count(R: float, gamma: float) -> float:
    """Number of clusters s*/(2 pi R) seeded by the fastest-growing mode (unrounded)."""
    if not 0 < R <= 0.5:
        raise ValueError("R must lie in (0, 1/2]")
    return most_unstable_s(gamma) / (2 * np.pi * R)


def dispersion_growth_rate(k, R: float, sigma: float):
    """Linear growth rate 2R f_gamma(2 pi k R) of Fourier mode k about rho = 1."""
    k = np.asarray(k)
    if np.any(k < 1):
        raise ValueError("mode number must be >= 1")
    out = 2 * R * f_gamma(2 * np.pi * k * R, gamma_of(R, sigma))
    return out


def critical_sigma_disordered(R: float, d: int = 1) -> float:
    """Noise level below which the uniform state is linearly unstable in dimension d."""
    if R <= 0 or d < 1:
        raise ValueError("need R > 0 and d >= 1")
    coeff = 4 * math.pi ** (d / 2) / (d * (d + 2) * math.gamma(d / 2))
    return math.sqrt(coeff * R**3)


def critical_sigma_clustered(R: float) -> float:
    """Noise level above which clusters are globally unstable."""
    if not 0 < R <= 0.5:
        raise ValueError("R must lie in (0, 1/2]")
    return math.sqrt(2 * (R + R**2 / math.sqrt(3)) / math.pi)


def ball_volume(d: int, r=1.0):
    """Volume of the d-ball of radius r (d = 0 gives 1)."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * np.asarray(r, dtype=float) ** d


def F_gamma_d(s: float, gamma: float, d: int = 1) -> float:
    """d-dimensional dispersion function, reduced to a 1-D integral over z1."""
    if s < 0 or d < 1:
        raise ValueError("need s >= 0 and d >= 1")
    if s == 0:
        return 0.0

    def integrand(z):
        return z * math.sin(s * z) * float(ball_volume(d - 1, math.sqrt(max(0.0, 1 - z * z))))

    # integrand is even in z
    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    return s * val - gamma * s * s


def unstable_modes(R: float, sigma: float, k_max: int = 1000) -> np.ndarray:
    """Integer modes k >= 1 with positive growth rate."""
    gamma = gamma_of(R, sigma)
    if gamma > 0:
        # |sin s / s - cos s| <= 1 + 1/s, so f < 0 once gamma s^2 > 1 + 1/s
        s_bound = max(1.0, math.sqrt(2 / gamma))
        k_max = min(k_max, int(s_bound / (2 * np.pi * R)) + 1)
    k = np.arange(1, k_max + 1)
    return k[f_gamma(2 * np.pi * k * R, gamma) > 0]


def classify_phase_region(R: float, sigma: float) -> PhaseRegion:
    """Place (R, sigma) relative to the two critical curves."""
    lo = critical_sigma_disordered(R, 1)
    hi = critical_sigma_clustered(R)
    if sigma < lo:
        label = DISORDERED_UNSTABLE if unstable_modes(R, sigma).size else INDETERMINATE
    elif sigma > hi:
        label = CLUSTERED_UNSTABLE
    else:
        label = BISTABLE
    return PhaseRegion(label=label, sigma_lower=lo, sigma_upper=hi)


def f_gamma_table(gammas, s_values):
    """Rows (gamma, s, f_gamma(s))."""
    rows = []
    for g in gammas:
        for s, f in zip(s_values, f_gamma(np.asarray(s_values, dtype=float), g)):
            rows.append((float(g), float(s), float(f)))
    return rows


def zone_table(R_values):
    """Rows (R, sigma_lower, sigma_upper, label-at-midpoint)."""
    rows = []
    for R in R_values:
        lo, hi = critical_sigma_disordered(R, 1), critical_sigma_clustered(R)
        rows.append((float(R), lo, hi, classify_phase_region(R, 0.5 * (lo + hi)).label))
    return rows
