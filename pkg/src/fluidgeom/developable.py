"""Developable surfaces generated by shear flows, the metric g*, shortness and energy.

A shear flow ``u = u(x2)`` gives the flat surface ``y = (A x2, A x1, f(x2))`` where
the slope ``f'`` solves ``-f'' = u^2 ((f')^2 + A^2)`` with ``f'(0) = 0``.  Its
metric is ``g* = diag(A^2, (f')^2 + A^2)`` and its normalized second fundamental
form is ``(0, 0, u^2)``.

Separating the ODE for constant ``u = c`` gives ``f' = -A tan(A c^2 x2)``; the
arctan form that is sometimes quoted for this family does not solve the ODE.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import GridMismatch, ProfileBlowup, ValidationError
from .geometry import Immersion, MetricField, SymmetricField
from .grid import Grid2D, ScalarField

BLOWUP_FACTOR = 10.0


@dataclass(frozen=True)
class ShearProfile:
    """Shear velocity ``u(x2)`` and the scale ``A > 1``.

    ``u`` is a vectorized callable or a pair ``(x2_nodes, values)`` that is
    interpolated linearly.  ``du`` optionally gives ``u'`` (only needed for third
    derivatives of the surface).
    """

    u: Union[Callable, tuple]
    A: float = 2.0
    du: Optional[Callable] = None

    def __post_init__(self):
        if not self.A > 1.0:
            raise ValidationError("A must exceed 1")
        if not callable(self.u):
            x, v = (np.asarray(a, dtype=float) for a in self.u)
            if x.ndim != 1 or x.shape != v.shape or len(x) < 2:
                raise ValidationError("tabulated profile needs matching 1-D node and value arrays")
            if not np.all(np.isfinite(v)):
                raise ValidationError("tabulated profile must be finite")
            order = np.argsort(x)
            object.__setattr__(self, "u", (x[order], v[order]))

    def velocity(self, x2):
        x2 = np.asarray(x2, dtype=float)
        if callable(self.u):
            return np.broadcast_to(np.asarray(self.u(x2), dtype=float), x2.shape)
        return np.interp(x2, *self.u)

    def velocity_slope(self, x2):
        x2 = np.asarray(x2, dtype=float)
        if self.du is not None:
            return np.broadcast_to(np.asarray(self.du(x2), dtype=float), x2.shape)
        if callable(self.u):
            e = 1e-5
            return (self.velocity(x2 + e) - self.velocity(x2 - e)) / (2 * e)
        xs, vs = self.u
        slopes = np.diff(vs) / np.diff(xs)
        idx = np.clip(np.searchsorted(xs, x2, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]


@dataclass(frozen=True)
class ProfileTable:
    """``f`` and ``f'`` sampled at the requested abscissae."""

    x2: np.ndarray
    f: np.ndarray
    fp: np.ndarray


def _rhs(sp: ShearProfile, x, state):
    f, fp = state
    return np.array([fp, -sp.velocity(x) ** 2 * (fp**2 + sp.A**2)])


def _rk4_march(sp: ShearProfile, targets, max_step):
    """Integrate from 0 through the sorted ``targets`` (all of one sign)."""
    out = np.empty((len(targets), 2))
    x, y = 0.0, np.zeros(2)
    guard = BLOWUP_FACTOR * sp.A
    for k, xt in enumerate(targets):
        n = max(1, math.ceil(abs(xt - x) / max_step))
        h = (xt - x) / n
        for _ in range(n):
            k1 = _rhs(sp, x, y)
            k2 = _rhs(sp, x + h / 2, y + h / 2 * k1)
            k3 = _rhs(sp, x + h / 2, y + h / 2 * k2)
            k4 = _rhs(sp, x + h, y + h * k3)
            y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(y_new)) or abs(y_new[1]) > guard:
                raise ProfileBlowup(
                    f"|f'| exceeds {guard:g} near x2 = {x + h:.6g}", tuple(sorted((0.0, float(x)))), float(y[1])
                )
            x, y = x + h, y_new
        out[k] = y
    return out


def integrate_profile(sp: ShearProfile, x2, max_step: float = 1e-3) -> ProfileTable:
    """``f`` and ``f'`` at the points ``x2`` by RK4 from ``f(0) = f'(0) = 0``."""
    x2 = np.asarray(x2, dtype=float)
    flat = x2.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = np.zeros((len(uniq), 2))
    pos, neg = uniq > 0, uniq < 0
    if np.any(pos):
        vals[pos] = _rk4_march(sp, uniq[pos], max_step)
    if np.any(neg):
        vals[neg] = _rk4_march(sp, uniq[neg][::-1], max_step)[::-1]
    f = vals[inv, 0].reshape(x2.shape)
    fp = vals[inv, 1].reshape(x2.shape)
    return ProfileTable(x2, f, fp)


def shear_profile_slope(sp: ShearProfile, grid: Grid2D, max_step: float = 1e-3) -> ScalarField:
    """Slope ``f'(x2)`` on the grid from the profile ODE (RK4, blow-up guard ``10 A``)."""
    tab = integrate_profile(sp, grid.x2, max_step)
    return ScalarField(grid, np.broadcast_to(tab.fp, grid.shape))


def tan_closed_form(c: float, A: float, x2):
    """Separable solution ``f' = -A tan(A c^2 x2)`` for constant ``u = c``."""
    return -A * np.tan(A * c**2 * np.asarray(x2, dtype=float))


def shear_surface(sp: ShearProfile, grid: Grid2D, analytic: bool = True, max_step: float = 1e-3) -> Immersion:
    """Surface ``y = (A x2, A x1, f(x2))``; with ``analytic`` derivatives come from the ODE."""
    A = sp.A

    def closure(X1, X2):
        tab = integrate_profile(sp, X2, max_step)
        fp = tab.fp
        u = sp.velocity(X2)
        fpp = -(u**2) * (fp**2 + A**2)
        fppp = -2 * u * sp.velocity_slope(X2) * (fp**2 + A**2) - 2 * u**2 * fp * fpp
        y = np.stack([A * X2, A * X1, tab.f], -1)
        dy = np.zeros(X1.shape + (3, 2))
        dy[..., 1, 0] = A
        dy[..., 0, 1] = A
        dy[..., 2, 1] = fp
        d2y = np.zeros(X1.shape + (3, 2, 2))
        d2y[..., 2, 1, 1] = fpp
        d3y = np.zeros(X1.shape + (3, 2, 2, 2))
        d3y[..., 2, 1, 1, 1] = fppp
        return {"y": y, "dy": dy, "d2y": d2y, "d3y": d3y}

    vals = closure(*grid.mesh())
    return Immersion(grid, vals["y"], closure=closure if analytic else None)


def gstar_metric(sp: ShearProfile, grid: Grid2D, points=None, max_step: float = 1e-3) -> MetricField:
    """Closed-form ``g* = (A^2, 0, (f')^2 + A^2)`` at the grid nodes or at ``points = (X1, X2)``."""
    X1, X2 = grid.mesh() if points is None else points
    if X1.shape != grid.shape:
        raise GridMismatch("points do not match the grid")
    fp = integrate_profile(sp, X2, max_step).fp
    A2 = np.full(grid.shape, sp.A**2)
    return MetricField(grid, A2, np.zeros(grid.shape), fp**2 + A2)


def _min_eig(a, b, c):
    return 0.5 * (a + c) - np.hypot(0.5 * (a - c), b)


def shortness_margin(g: SymmetricField, gstar: SymmetricField) -> ScalarField:
    """Per-node smallest eigenvalue of ``g* - g``; positive where ``g`` is short for ``g*``."""
    if g.grid != gstar.grid:
        raise GridMismatch("metrics live on different grids")
    return ScalarField(g.grid, _min_eig(gstar.g11 - g.g11, gstar.g12 - g.g12, gstar.g22 - g.g22))


def _trapezoid2(f, h1, h2):
    return float(np.trapezoid(np.trapezoid(f, dx=h2, axis=1), dx=h1))


def energy(obj: Union[SymmetricField, Immersion], region=None) -> float:
    """``int (g11 + g22) dx`` by the trapezoid rule; ``region`` is a pair of index slices."""
    if isinstance(obj, Immersion):
        dy = obj.first_derivatives()
        density = np.sum(dy[..., 0] ** 2 + dy[..., 1] ** 2, axis=-1)
    else:
        density = obj.g11 + obj.g22
    grid = obj.grid
    if region is not None:
        density = density[region]
    return _trapezoid2(density, grid.h1, grid.h2)
