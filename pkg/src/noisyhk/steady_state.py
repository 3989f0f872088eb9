"""Single- and multi-cluster steady states of the density equation at small noise.

Coordinates follow the analysis convention: the cluster sits at 0 on
[-1/2, 1/2].  The integral form of the steady equation is

    rho(x) = rho(0) exp{(2 / sigma^2) int K(x, y) rho(y) dy},
    K(x, y) = int_0^x (y - xi) 1{|y - xi| <= R} dxi,

and its small-noise solution is a Gaussian core with a flat plateau,
C exp(-min(x^2, R^2) / sigma^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import periodic_distance, signed_displacement


class AsymmetricInputError(ValueError):
    pass


class ClustersInteractError(ValueError):
    pass


def kernel_K(x, y, R: float):
    """Closed-form K(x, y) for x, y in [-1/2, 1/2] (vectorised)."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    near = 0.5 * (R + x - y) * (R - x + y)
    inner = -0.5 * x * (x - 2 * y)
    origin = 0.5 * (y * y - R * R)

    far = np.abs(x) > 2 * R
    pos = (x >= 0) & (x <= 2 * R)
    neg = (x < 0) & (x >= -2 * R)

    conds = [
        far & (x - R <= y) & (y <= x + R),
        far & (-R <= y) & (y <= R),
        pos & (R <= y) & (y <= x + R),
        pos & (x - R <= y) & (y <= R),
        pos & (-R <= y) & (y <= x - R),
        neg & (x - R <= y) & (y <= -R),
        neg & (-R <= y) & (y <= x + R),
        neg & (x + R <= y) & (y <= R),
    ]
    out = np.select(conds, [near, origin, near, inner, origin, near, inner, origin], default=0.0)
    return float(out) if out.ndim == 0 else out


def kernel_K_quadrature(x: float, y: float, R: float) -> float:
    """K(x, y) by adaptive quadrature of its defining integral."""
    from scipy import integrate

    lo, hi = sorted((0.0, x))
    sign = 1.0 if x >= 0 else -1.0
    breaks = [p for p in (y - R, y + R) if lo < p < hi]
    val, _ = integrate.quad(lambda xi: (y - xi) * (abs(y - xi) <= R), lo, hi, points=breaks or None,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return sign * val


def profile_normalization(R: float, sigma: float, L: float = 1.0) -> float:
    """C such that C exp(-min(d^2, R^2) / sigma^2) has unit mass on the circle."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    core = sigma * math.sqrt(math.pi) * math.erf(R / sigma)
    plateau = (L - 2 * R) * math.exp(-((R / sigma) ** 2))
    return 1.0 / (core + plateau)


@dataclass(frozen=True)
class ClusterProfile:
    center: float
    sigma: float
    R: float
    C: float

    @classmethod
    def build(cls, center: float, R: float, sigma: float) -> "ClusterProfile":
        return cls(center=center, sigma=sigma, R=R, C=profile_normalization(R, sigma))

    def __call__(self, x):
        d = signed_displacement(self.center, np.asarray(x, dtype=float))
        return self.C * np.exp(-np.minimum(d * d, self.R**2) / self.sigma**2)


def asymptotic_profile(x, center: float, R: float, sigma: float):
    return ClusterProfile.build(center, R, sigma)(x)


def analysis_grid(n: int = 2048) -> np.ndarray:
    """n + 1 equispaced points on [-1/2, 1/2]; x = 0 is the middle one."""
    if n % 2:
        raise ValueError("n must be even so that x = 0 is a grid point")
    return np.linspace(-0.5, 0.5, n + 1)


def _trapezoid_weights(x):
    w = np.full(x.size, x[1] - x[0])
    w[0] = w[-1] = 0.5 * (x[1] - x[0])
    return w


def fixed_point_map(rho, R: float, sigma: float):
    """rho(0) exp{(2/sigma^2) int K(x, y) rho(y) dy} on the analysis grid, by trapezoid."""
    rho = np.asarray(rho, dtype=float)
    x = analysis_grid(rho.size - 1)
    K = kernel_K(x[:, None], x[None, :], R)
    exponent = (2 / sigma**2) * (K @ (_trapezoid_weights(x) * rho))
    return rho[rho.size // 2] * np.exp(exponent)


def fixed_point_residual(rho, R: float, sigma: float, symmetry_tol: float = 0.01) -> float:
    """Max-norm residual of the integral steady-state equation.

    ``rho`` is sampled on ``analysis_grid(len(rho) - 1)``, centred at 0.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.size < 3 or rho.size % 2 == 0:
        raise ValueError("rho must be sampled on an odd number of points spanning [-1/2, 1/2]")
    if np.any(rho < 0):
        raise ValueError("rho must be nonnegative")
    if np.max(np.abs(rho - rho[::-1])) > symmetry_tol * rho.max():
        raise AsymmetricInputError("asymmetric input")
    return float(np.max(np.abs(rho - fixed_point_map(rho, R, sigma))))


def multi_cluster_profile(centers, R: float, sigma: float, x=None, weights=None):
    """Normalised mixture of well-separated single-cluster profiles on grid ``x``."""
    centers = [float(c) for c in centers]
    if not centers:
        raise ValueError("need at least one center")
    for i, a in enumerate(centers):
        for b in centers[i + 1 :]:
            if periodic_distance(a, b) <= 2 * R:
                raise ClustersInteractError(f"clusters interact: centers {a} and {b} are within 2R")
    if weights is None:
        weights = np.full(len(centers), 1.0 / len(centers))
    else:
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
    if x is None:
        x = np.arange(2048) / 2048
    x = np.asarray(x, dtype=float)
    return sum(w * asymptotic_profile(x, c, R, sigma) for w, c in zip(weights, centers))


def residual_table(sigmas, R: float, n: int = 2048):
    """Rows (sigma, residual / rho(0)) for the asymptotic profile."""
    x = analysis_grid(n)
    rows = []
    for s in sigmas:
        rho = asymptotic_profile(x, 0.0, R, s)
        rows.append((float(s), fixed_point_residual(rho, R, s) / rho[n // 2]))
    return rows
