"""Corrugation profile ``Gamma(z1, z2)``.

The profile has ``d_{z2} Gamma + (1, 0) = sqrt(1 + z1^2) (cos theta, sin theta)`` with
``theta = alpha(z1) cos z2``.  Periodicity in ``z2`` forces the z2-mean of
``cos(alpha cos z2)`` to equal ``1 / sqrt(1 + z1^2)``; that mean is the Bessel
function ``J0(alpha)``.  Expanding ``cos theta`` and ``sin theta`` in their
Fourier-Bessel series gives ``Gamma`` in closed form, mean free and exactly
``2 pi``-periodic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import j0, j1, jv

from ..errors import ClosureFailure, ValidationError

ALPHA_MAX = 2.404825557695773  # first zero of J0
N_TERMS = 18


def mean_cos(alpha, samples: int = 256) -> float:
    """z2-mean of ``cos(alpha cos z2)`` by the periodic trapezoid rule."""
    z2 = 2 * np.pi * np.arange(samples) / samples
    return float(np.mean(np.cos(alpha * np.cos(z2))))


def alpha_by_quadrature(z1: float, samples: int = 256) -> float:
    """Solve ``sqrt(1 + z1^2) * mean_cos(alpha) = 1`` by bisection."""
    if z1 == 0:
        return 0.0
    target = 1.0 / np.sqrt(1.0 + z1 * z1)
    f = lambda a: mean_cos(a, samples) - target
    lo, hi = 0.0, ALPHA_MAX
    if f(lo) * f(hi) > 0:
        raise ClosureFailure(f"mean-closure equation has no root for z1 = {z1}")
    return bisect(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def alpha_of(z1) -> np.ndarray:
    """Vectorized ``alpha(z1)`` by bisection on ``J0(alpha) = 1 / sqrt(1 + z1^2)``."""
    z1 = np.asarray(z1, dtype=float)
    target = 1.0 / np.sqrt(1.0 + z1 * z1)
    if np.any(target <= 0):
        raise ClosureFailure("mean-closure equation has no root")
    lo = np.zeros_like(z1)
    hi = np.full_like(z1, ALPHA_MAX)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        above = j0(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def _alpha_slope(z1, alpha):
    r = np.sqrt(1.0 + z1 * z1)
    J1 = j1(alpha)
    safe = np.abs(J1) > 1e-6
    return np.where(safe, z1 / (r**3 * np.where(safe, J1, 1.0)), np.sqrt(2.0))


@dataclass(frozen=True)
class ProfileValues:
    """``Gamma``, ``d_{z2} Gamma`` and ``d_{z1} Gamma``; each has a trailing axis of size 2."""

    G: np.ndarray
    Gs: np.ndarray
    Gz: np.ndarray


def evaluate(z1, z2) -> ProfileValues:
    """Closed-form profile at arbitrary points (broadcasting)."""
    z1, z2 = np.broadcast_arrays(np.asarray(z1, dtype=float), np.asarray(z2, dtype=float))
    if np.any(z1 < 0):
        raise ValidationError("z1 must be nonnegative")
    alpha = alpha_of(z1)
    r = np.sqrt(1.0 + z1 * z1)
    dr = z1 / r
    da = _alpha_slope(z1, alpha)
    theta = alpha * np.cos(z2)
    Gs = np.stack([r * np.cos(theta) - 1.0, r * np.sin(theta)], -1)
    G = np.zeros(z1.shape + (2,))
    Gz = np.zeros(z1.shape + (2,))
    for k in range(1, N_TERMS + 1):
        # cos(a cos s) carries even k, sin(a cos s) odd k; sign (-1)^floor(k/2)
        comp = k % 2
        sign = -1.0 if (k // 2) % 2 else 1.0
        Jk = jv(k, alpha)
        dJk = 0.5 * (jv(k - 1, alpha) - jv(k + 1, alpha))
        c = 2 * sign * r * Jk
        dc = 2 * sign * (dr * Jk + r * dJk * da)
        sk = np.sin(k * z2) / k
        G[..., comp] += c * sk
        Gz[..., comp] += dc * sk
    return ProfileValues(G, Gs, Gz)


@dataclass(frozen=True)
class CorrugationProfile:
    """Tabulated profile on ``[0, delta_star] x [0, 2 pi)``; the z2 axis wraps.

    ``alpha`` is found by quadrature and bisection at every z1 node; ``gamma`` and
    ``dgamma`` hold ``Gamma`` and ``d_{z2} Gamma`` with shape ``(n1, n2, 2)``.
    """

    delta_star: float
    z1: np.ndarray
    z2: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    dgamma: np.ndarray

    def identity_defect(self) -> float:
        """Max of ``| |d Gamma + (1, 0)|^2 - (1 + z1^2) |`` over the table."""
        v = self.dgamma + np.array([1.0, 0.0])
        lhs = np.sum(v * v, -1)
        return float(np.max(np.abs(lhs - (1.0 + self.z1[:, None] ** 2))))

    def evaluate(self, z1, z2) -> ProfileValues:
        if np.any(np.asarray(z1) > self.delta_star * (1 + 1e-12)):
            raise ValidationError("z1 exceeds delta_star")
        return evaluate(z1, z2)


def build_corrugation_profile(delta_star: float = 0.5, samples=(256, 256)) -> CorrugationProfile:
    """Tabulate the profile; ``delta_star <= 0.7``."""
    if not 0 < delta_star <= 0.7:
        raise ValidationError("delta_star must lie in (0, 0.7]")
    n1, n2 = samples
    z1 = np.linspace(0.0, delta_star, n1)
    z2 = 2 * np.pi * np.arange(n2) / n2
    alpha = np.array([alpha_by_quadrature(z, n2) for z in z1])
    r = np.sqrt(1.0 + z1**2)[:, None]
    theta = alpha[:, None] * np.cos(z2)[None, :]
    dgamma = np.stack([r * np.cos(theta) - 1.0, r * np.sin(theta)], -1)
    gamma = evaluate(z1[:, None], z2[None, :]).G
    return CorrugationProfile(delta_star, z1, z2, alpha, gamma, dgamma)
