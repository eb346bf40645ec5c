"""Single corrections: deficits, primitive metrics, mollification, corrugations and spirals.

Maps carry their Jacobian explicitly (``Immersion.dy``).  A corrugation adds a
term oscillating at frequency ``lambda``; differentiating it on the grid would
alias, so the Jacobian is updated with the exact chain rule and only the slowly
varying factors (frame fields and amplitudes) are differentiated by stencils.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.ndimage import correlate1d

from ..errors import (
    AmplitudeOverflow,
    GridMismatch,
    KernelWiderThanGrid,
    NonOrthonormalFrame,
    OutsideCone,
    RankCondition,
    ValidationError,
)
from ..geometry import Immersion, SymmetricField, induced_metric
from ..grid import Grid2D, diff
from .profile import CorrugationProfile

S2 = 1.0 / np.sqrt(2.0)
DIRECTIONS = {
    "e1": np.array([1.0, 0.0]),
    "e2": np.array([0.0, 1.0]),
    "diag+": np.array([S2, S2]),
    "diag-": np.array([S2, -S2]),
}


# Deficits


def metric_deficit(y: Immersion, g: SymmetricField, pad: int = 2):
    """``h = g - y^# e`` and the sup over interior nodes of its largest absolute eigenvalue."""
    if y.grid != g.grid:
        raise GridMismatch("map and metric live on different grids")
    m = induced_metric(y)
    h = SymmetricField(g.grid, g.g11 - m.g11, g.g12 - m.g12, g.g22 - m.g22)
    return h, sup_abs_eig(h, pad)


def sup_abs_eig(h: SymmetricField, pad: int = 2) -> float:
    I = h.grid.interior(pad)
    a, b, c = h.g11[I], h.g12[I], h.g22[I]
    mean, rad = 0.5 * (a + c), np.hypot(0.5 * (a - c), b)
    return float(np.max(np.abs(mean) + rad))


def min_eig(h: SymmetricField) -> np.ndarray:
    return 0.5 * (h.g11 + h.g22) - np.hypot(0.5 * (h.g11 - h.g22), h.g12)


def is_short(y: Immersion, g: SymmetricField, pad: int = 2, tol: float = 0.0) -> bool:
    """True iff the deficit is positive definite at every interior node."""
    h, _ = metric_deficit(y, g, pad)
    return bool(np.all(min_eig(h)[h.grid.interior(pad)] > tol))


# Primitive metrics


@dataclass(frozen=True)
class PrimitiveMetric:
    """``a^2 nu (x) nu`` with a nonnegative amplitude field and a fixed unit covector."""

    grid: Grid2D
    a: np.ndarray
    nu: np.ndarray
    name: str = ""

    def __post_init__(self):
        a = np.broadcast_to(np.asarray(self.a, dtype=float), self.grid.shape)
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValidationError("amplitude must be finite and nonnegative")
        nu = np.asarray(self.nu, dtype=float)
        if not any(np.allclose(nu, d) for d in DIRECTIONS.values()):
            raise ValidationError("direction must be one of the four fixed covectors")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "nu", nu)

    def tensor(self):
        a2 = self.a**2
        n = self.nu
        return a2 * n[0] * n[0], a2 * n[0] * n[1], a2 * n[1] * n[1]


def primitive_decomposition(h: SymmetricField, tol: float = 1e-14):
    """Split ``h`` into primitive metrics along ``e1``, ``e2`` and the diagonals.

    ``a3^2 = 2 |h12|`` along ``(1, 1)/sqrt 2`` where ``h12 >= 0`` and along
    ``(1, -1)/sqrt 2`` where ``h12 < 0``; ``a1^2 = h11 - |h12|``, ``a2^2 = h22 - |h12|``.
    Returns three primitives when ``h12`` has one sign and four otherwise.
    """
    h11, h12, h22 = h.g11, h.g12, h.g22
    ah = np.abs(h12)
    if np.any(h11 - ah < -tol) or np.any(h22 - ah < -tol):
        raise OutsideCone("deficit violates h11 >= |h12| or h22 >= |h12|")
    grid = h.grid
    out = [
        PrimitiveMetric(grid, np.sqrt(np.maximum(h11 - ah, 0.0)), DIRECTIONS["e1"], "e1"),
        PrimitiveMetric(grid, np.sqrt(np.maximum(h22 - ah, 0.0)), DIRECTIONS["e2"], "e2"),
    ]
    pos = h12 >= 0
    if np.all(pos):
        out.append(PrimitiveMetric(grid, np.sqrt(2 * ah), DIRECTIONS["diag+"], "diag+"))
    elif not np.any(pos):
        out.append(PrimitiveMetric(grid, np.sqrt(2 * ah), DIRECTIONS["diag-"], "diag-"))
    else:
        out.append(PrimitiveMetric(grid, np.sqrt(np.where(pos, 2 * ah, 0.0)), DIRECTIONS["diag+"], "diag+"))
        out.append(PrimitiveMetric(grid, np.sqrt(np.where(pos, 0.0, 2 * ah)), DIRECTIONS["diag-"], "diag-"))
    return out


def recompose(prims) -> tuple:
    parts = [p.tensor() for p in prims]
    return tuple(sum(t[i] for t in parts) for i in range(3))


def cone_fraction(h: SymmetricField):
    """Largest per-node ``theta in (0, 1]`` with ``theta h + (1 - theta) m Id`` in the cone.

    ``m`` is the smallest eigenvalue of ``h`` clipped at zero, so the part left
    uncorrected, ``(1 - theta)(h - m Id)``, is positive semidefinite.  Returns the
    corrected deficit and ``theta``.
    """
    m = np.maximum(min_eig(h), 0.0)
    ah = np.abs(h.g12)
    theta = np.ones(h.grid.shape)
    for d in (h.g11, h.g22):
        gap = ah - d
        bad = gap > 0
        theta = np.where(bad, np.minimum(theta, m / np.where(bad, m + gap, 1.0)), theta)
    h_in = SymmetricField(
        h.grid,
        theta * h.g11 + (1 - theta) * m,
        theta * h.g12,
        theta * h.g22 + (1 - theta) * m,
    )
    return h_in, theta


# Mollification


def mollifier_taps(l: float, h: float) -> np.ndarray:
    """Truncated Gaussian taps of radius ``l`` (standard deviation ``l / 2``), summing to 1."""
    radius = int(np.floor(l / h))
    if radius == 0:
        return np.ones(1)
    x = h * np.arange(-radius, radius + 1)
    w = np.exp(-0.5 * (2 * x / l) ** 2)
    return w / w.sum()


def mollify(field: np.ndarray, l: float, grid: Grid2D) -> np.ndarray:
    """Convolve the leading two axes with a compactly supported kernel of radius ``l``."""
    if l < 0:
        raise ValidationError("mollification width must be nonnegative")
    out = np.asarray(field, dtype=float)
    for axis, h, n in ((0, grid.h1, grid.nx), (1, grid.h2, grid.ny)):
        w = mollifier_taps(l, h)
        if len(w) > n:
            raise KernelWiderThanGrid(f"kernel of {len(w)} taps exceeds {n} nodes")
        if len(w) > 1:
            out = correlate1d(out, w, axis=axis, mode="nearest")
    return out


def mollify_map(y: Immersion, l: float) -> Immersion:
    """Mollify a map with tracked Jacobian; affine parts pass through unchanged."""
    grid = y.grid
    X1, X2 = grid.mesh()
    J = y.first_derivatives()
    # least-squares affine part of y
    basis = np.stack([np.ones_like(X1), X1, X2], -1).reshape(-1, 3)
    coef, *_ = np.linalg.lstsq(basis, y.y.reshape(-1, 3), rcond=None)
    affine = (basis @ coef).reshape(y.y.shape)
    lin = np.stack([coef[1], coef[2]], -1)
    y_new = affine + mollify(y.y - affine, l, grid)
    J_new = lin + mollify(J - lin, l, grid)
    return Immersion(grid, y_new, dy=J_new)


# Corrugation step


def cutoff_ramp(grid: Grid2D, width: int = 8) -> np.ndarray:
    """Product of ``sin^2`` ramps rising from 0 on the boundary to 1 after ``width`` nodes."""

    def ramp(n):
        d = np.minimum(np.arange(n), np.arange(n)[::-1]).astype(float)
        return np.where(d >= width, 1.0, np.sin(0.5 * np.pi * d / width) ** 2)

    return ramp(grid.nx)[:, None] * ramp(grid.ny)[None, :]


@dataclass(frozen=True)
class StepInfo:
    lam: float
    direction: str
    phase: float
    z_max: float
    clipped: int
    c0: float
    c1: float


def _grad(f, grid, order=4):
    return np.stack([diff(f, 0, grid.h1, order), diff(f, 1, grid.h2, order)], -1)


def corrugation_step(
    y: Immersion,
    pm: PrimitiveMetric,
    lam: float,
    profile: CorrugationProfile,
    phase: float = 0.0,
    cutoff: Optional[np.ndarray] = None,
    rank_bound: float = 100.0,
    strict: bool = False,
):
    """Add ``(1/lam) Psi Gamma(|xi| a, lam x.nu + phase)`` to the map.

    ``Psi = xi / |xi|^2 (x) e1 + zeta / |xi| (x) e2`` with ``xi = dy (dy^T dy)^{-1} nu`` and
    ``zeta`` the unit normal.  To leading order the pullback gains ``a^2 nu (x) nu``.
    Amplitudes above ``delta_star`` are clipped (``strict`` raises instead).
    Returns the new map and a :class:`StepInfo`.
    """
    grid = y.grid
    if pm.grid != grid:
        raise GridMismatch("primitive metric and map live on different grids")
    J = y.first_derivatives()
    G = np.einsum("...ki,...kj->...ij", J, J)
    ev = np.linalg.eigvalsh(G)
    if np.any(ev[..., 0] < 1.0 / rank_bound) or np.any(ev[..., 1] > rank_bound):
        raise RankCondition("pullback metric leaves the uniform rank bounds")
    nu = pm.nu
    Gi_nu = np.linalg.solve(G, np.broadcast_to(nu, G.shape[:-1])[..., None])[..., 0]
    xi = np.einsum("...ki,...i->...k", J, Gi_nu)
    nxi2 = np.einsum("...i,...i->...", nu, Gi_nu)
    nxi = np.sqrt(nxi2)
    zeta = np.cross(J[..., 0], J[..., 1])
    zeta /= np.linalg.norm(zeta, axis=-1, keepdims=True)
    a = pm.a if cutoff is None else pm.a * cutoff
    z = nxi * a
    over = z > profile.delta_star
    clipped = int(np.count_nonzero(over))
    if clipped and strict:
        raise AmplitudeOverflow(f"{clipped} nodes exceed delta_star = {profile.delta_star}")
    z = np.minimum(z, profile.delta_star)
    if lam <= 0:
        raise ValidationError("frequency must be positive")

    X1, X2 = grid.mesh()
    s = lam * (nu[0] * X1 + nu[1] * X2) + phase
    pv = profile.evaluate(z, s)
    P1 = xi / nxi2[..., None]
    P2 = zeta / nxi[..., None]
    G1, G2 = pv.G[..., 0:1], pv.G[..., 1:2]
    dy_add = (G1 * P1 + G2 * P2) / lam
    dP1 = np.stack([diff(P1, 0, grid.h1, 4), diff(P1, 1, grid.h2, 4)], -1)
    dP2 = np.stack([diff(P2, 0, grid.h1, 4), diff(P2, 1, grid.h2, 4)], -1)
    dz = _grad(z, grid)
    w = pv.Gs[..., 0:1] * P1 + pv.Gs[..., 1:2] * P2
    wz = pv.Gz[..., 0:1] * P1 + pv.Gz[..., 1:2] * P2
    J_add = w[..., None] * nu + (
        G1[..., None] * dP1 + G2[..., None] * dP2 + wz[..., None] * dz[..., None, :]
    ) / lam
    I = grid.interior(2)
    info = StepInfo(
        float(lam),
        pm.name,
        float(phase),
        float(z.max()),
        clipped,
        float(np.max(np.abs(dy_add[I]))),
        float(np.max(np.abs(J_add[I]))),
    )
    return Immersion(grid, y.y + dy_add, dy=J + J_add), info


# Nash spirals for curves


@dataclass(frozen=True)
class Curve:
    """Curve samples ``y(t)`` in R^3 with an optional tracked derivative ``dy``."""

    t: np.ndarray
    y: np.ndarray
    dy: Optional[np.ndarray] = None

    def derivative(self):
        if self.dy is not None:
            return self.dy
        return np.gradient(self.y, self.t, axis=0, edge_order=2)

    def speed2(self):
        d = self.derivative()
        return np.sum(d * d, -1)


def _check_frame(T, nu, xi, tol=1e-8):
    dots = [np.sum(nu * nu, -1) - 1, np.sum(xi * xi, -1) - 1, np.sum(nu * xi, -1), np.sum(nu * T, -1), np.sum(xi * T, -1)]
    if max(float(np.max(np.abs(d))) for d in dots) > tol:
        raise NonOrthonormalFrame("normal fields must be orthonormal and orthogonal to the tangent")


def spiral_step(curve: Curve, a, psi, lam: float, nu, xi) -> Curve:
    """Add the wrinkle ``(a/lam)(cos(lam psi) nu + sin(lam psi) xi)``.

    The derivative is updated exactly in the oscillating factor; ``a``, ``psi`` and
    the frame are differentiated by stencils.  The squared speed gains
    ``a^2 psi'^2 + O(1/lam)``.
    """
    t = np.asarray(curve.t, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), t.shape)
    psi = np.broadcast_to(np.asarray(psi, dtype=float), t.shape)
    nu = np.asarray(nu, dtype=float) * np.ones((len(t), 1))
    xi = np.asarray(xi, dtype=float) * np.ones((len(t), 1))
    dy = curve.derivative()
    T = dy / np.linalg.norm(dy, axis=-1, keepdims=True)
    _check_frame(T, nu, xi)
    c, s = np.cos(lam * psi)[:, None], np.sin(lam * psi)[:, None]
    g = lambda f: np.gradient(f, t, axis=0, edge_order=2)
    da, dpsi = g(a)[:, None], g(psi)[:, None]
    w = (a[:, None] / lam) * (c * nu + s * xi)
    dw = a[:, None] * dpsi * (-s * nu + c * xi) + (da * (c * nu + s * xi) + a[:, None] * (c * g(nu) + s * g(xi))) / lam
    return Curve(t, curve.y + w, dy + dw)
