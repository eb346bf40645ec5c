"""Metrics, Christoffel symbols, curvature and fundamental forms on a grid.

Second fundamental forms are stored only in the normalized convention
``(L, M, N) = (n . d_ij y) / sqrt(det g)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateSurface, SingularMetric, ValidationError
from .grid import Grid2D, Jet, ScalarField, _frozen, check_same_grid, diff, stencil_jet

DET_FLOOR = 1e-12
_CSTEP = 1e-30


@dataclass(frozen=True)
class SymmetricField:
    """Symmetric 2x2 tensor field with no definiteness requirement."""

    grid: Grid2D
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    closure: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("g11", "g12", "g22"):
            vals = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.grid.shape)
            if not np.all(np.isfinite(vals)):
                raise ValidationError(f"{name} contains non-finite values")
            object.__setattr__(self, name, _frozen(vals))

    @property
    def det(self):
        return self.g11 * self.g22 - self.g12**2

    def jets(self, order=2):
        """Jets of (g11, g12, g22), from the closure when available."""
        if self.closure is not None:
            return self.closure(*self.grid.mesh())
        return tuple(stencil_jet(c, self.grid, order) for c in (self.g11, self.g12, self.g22))

    def eigvals(self):
        """Per-node eigenvalues (smaller, larger)."""
        mean = 0.5 * (self.g11 + self.g22)
        rad = np.hypot(0.5 * (self.g11 - self.g22), self.g12)
        return mean - rad, mean + rad

    def as_array(self):
        return np.stack(
            [np.stack([self.g11, self.g12], -1), np.stack([self.g12, self.g22], -1)], -2
        )


class MetricField(SymmetricField):
    """Symmetric positive-definite metric ``g_ij``."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.g11 <= 0) or np.any(self.det <= 0):
            raise SingularMetric("metric is not positive definite at some node")


@dataclass(frozen=True)
class ChristoffelField:
    """The six independent symbols; ``c[k][(i, j)]`` with ``i <= j``."""

    grid: Grid2D
    g1_11: np.ndarray
    g1_12: np.ndarray
    g1_22: np.ndarray
    g2_11: np.ndarray
    g2_12: np.ndarray
    g2_22: np.ndarray

    def __call__(self, k, i, j):
        i, j = min(i, j), max(i, j)
        return getattr(self, f"g{k}_{i}{j}")

    def components(self):
        return (self.g1_11, self.g1_12, self.g1_22, self.g2_11, self.g2_12, self.g2_22)


@dataclass(frozen=True)
class FundamentalForm:
    """Normalized second fundamental form (L, M, N); closure returns three Jets."""

    grid: Grid2D
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray
    closure: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("L", "M", "N"):
            vals = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.grid.shape)
            if not np.all(np.isfinite(vals)):
                raise ValidationError(f"{name} contains non-finite values")
            object.__setattr__(self, name, _frozen(vals))

    def jets(self, order=2):
        if self.closure is not None:
            return self.closure(*self.grid.mesh())
        return tuple(stencil_jet(c, self.grid, order) for c in (self.L, self.M, self.N))


@dataclass(frozen=True)
class Immersion:
    """Map of the grid into R^3 with stored, analytic or stencil derivatives.

    ``closure(X1, X2)`` returns a dict with keys ``y`` (..., 3), ``dy`` (..., 3, 2),
    ``d2y`` (..., 3, 2, 2) and optionally ``d3y`` (..., 3, 2, 2, 2).
    ``dy`` may instead be supplied as a stored array (an exactly tracked Jacobian).
    """

    grid: Grid2D
    y: np.ndarray
    closure: Optional[Callable] = field(default=None, compare=False)
    dy: Optional[np.ndarray] = field(default=None, compare=False)
    order: int = 2

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.shape != self.grid.shape + (3,):
            raise ValidationError("immersion samples must have shape (nx, ny, 3)")
        object.__setattr__(self, "y", _frozen(y))
        if self.dy is not None:
            object.__setattr__(self, "dy", _frozen(self.dy))

    def _closure_values(self):
        return self.closure(*self.grid.mesh())

    def first_derivatives(self):
        if self.closure is not None:
            return self._closure_values()["dy"]
        if self.dy is not None:
            return self.dy
        g = self.grid
        return np.stack([diff(self.y, 0, g.h1, self.order), diff(self.y, 1, g.h2, self.order)], -1)

    def second_derivatives(self):
        if self.closure is not None:
            return self._closure_values()["d2y"]
        g = self.grid
        if self.dy is not None:
            dy = self.dy
            y11 = diff(dy[..., 0], 0, g.h1, self.order)
            y22 = diff(dy[..., 1], 1, g.h2, self.order)
            y12 = 0.5 * (diff(dy[..., 0], 1, g.h2, self.order) + diff(dy[..., 1], 0, g.h1, self.order))
        else:
            y11 = diff(self.y, 0, g.h1, self.order, 2)
            y22 = diff(self.y, 1, g.h2, self.order, 2)
            y12 = diff(diff(self.y, 0, g.h1, self.order), 1, g.h2, self.order)
        return np.stack([np.stack([y11, y12], -1), np.stack([y12, y22], -1)], -2)


# Metric from an immersion


def _check_regular(dy, grid):
    cross = np.cross(dy[..., 0], dy[..., 1])
    area = np.linalg.norm(cross, axis=-1)
    if np.any(area[grid.interior(1)] <= 1e-14):
        raise DegenerateSurface("d1 y x d2 y vanishes at an interior node")
    return cross, area


def _metric_closure_from(y_closure):
    def closure(X1, X2):
        vals = y_closure(X1, X2)
        dy, d2y, d3y = vals["dy"], vals["d2y"], vals["d3y"]

        def comp(i, j):
            v = np.einsum("...a,...a->...", dy[..., i], dy[..., j])
            first = [
                np.einsum("...a,...a->...", d2y[..., i, k], dy[..., j])
                + np.einsum("...a,...a->...", dy[..., i], d2y[..., j, k])
                for k in range(2)
            ]
            second = {}
            for k, l in ((0, 0), (0, 1), (1, 1)):
                second[(k, l)] = (
                    np.einsum("...a,...a->...", d3y[..., i, k, l], dy[..., j])
                    + np.einsum("...a,...a->...", d2y[..., i, k], d2y[..., j, l])
                    + np.einsum("...a,...a->...", d2y[..., i, l], d2y[..., j, k])
                    + np.einsum("...a,...a->...", dy[..., i], d3y[..., j, k, l])
                )
            return Jet(v, first[0], first[1], second[(0, 0)], second[(0, 1)], second[(1, 1)])

        return comp(0, 0), comp(0, 1), comp(1, 1)

    return closure


def induced_metric(y: Immersion) -> MetricField:
    """Pullback metric ``g_ij = d_i y . d_j y``."""
    dy = y.first_derivatives()
    _check_regular(dy, y.grid)
    g = np.einsum("...ai,...aj->...ij", dy, dy)
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    if np.any(det <= 0):
        raise DegenerateSurface("induced metric is degenerate")
    closure = None
    if y.closure is not None and "d3y" in y._closure_values():
        closure = _metric_closure_from(y.closure)
    return MetricField(y.grid, g[..., 0, 0], g[..., 0, 1], g[..., 1, 1], closure=closure)


def unit_normal(y: Immersion) -> np.ndarray:
    dy = y.first_derivatives()
    cross, area = _check_regular(dy, y.grid)
    return cross / area[..., None]


def second_fundamental_form(y: Immersion) -> FundamentalForm:
    """Normalized ``(L, M, N) = (n . d_11 y, n . d_12 y, n . d_22 y) / sqrt(det g)``."""
    dy = y.first_derivatives()
    cross, area = _check_regular(dy, y.grid)
    if np.any(area <= 0):
        raise DegenerateSurface("surface is singular at a boundary node")
    n = cross / area[..., None]
    d2y = y.second_derivatives()
    # |d1 y x d2 y| = sqrt(det g)
    L, M, N = (np.einsum("...a,...a->...", n, d2y[..., i, j]) / area for i, j in ((0, 0), (0, 1), (1, 1)))
    return FundamentalForm(y.grid, L, M, N)


# Christoffel symbols and curvature


def christoffel_from_derivatives(g11, g12, g22, d1g11, d2g11, d1g12, d2g12, d1g22, d2g22):
    """The six symbols as arrays; pure rational arithmetic (complex-step safe)."""
    det = g11 * g22 - g12 * g12
    c = 1.0 / (2.0 * det)
    g1_11 = c * (g22 * d1g11 - g12 * (2.0 * d1g12 - d2g11))
    g1_12 = c * (g22 * d2g11 - g12 * d1g22)
    g1_22 = c * (g22 * (2.0 * d2g12 - d1g22) - g12 * d2g22)
    g2_11 = c * (-g12 * d1g11 + g11 * (2.0 * d1g12 - d2g11))
    g2_12 = c * (-g12 * d2g11 + g11 * d1g22)
    g2_22 = c * (-g12 * (2.0 * d2g12 - d1g22) + g11 * d2g22)
    return g1_11, g1_12, g1_22, g2_11, g2_12, g2_22


def _check_det(g11, g12, g22):
    if np.any(g11 * g22 - g12**2 < DET_FLOOR):
        raise SingularMetric("det g below floor")


def _christoffel_args(j11, j12, j22):
    return (j11.v, j12.v, j22.v, j11.d1, j11.d2, j12.d1, j12.d2, j22.d1, j22.d2)


def christoffel(g: SymmetricField, order: int = 2) -> ChristoffelField:
    _check_det(g.g11, g.g12, g.g22)
    comps = christoffel_from_derivatives(*_christoffel_args(*g.jets(order)))
    return ChristoffelField(g.grid, *comps)


def _christoffel_derivative(jets, k):
    """Exact d_k of every symbol from second derivatives, via complex step."""
    j11, j12, j22 = jets
    if k == 0:
        pert = [(j.d1, j.d11, j.d12) for j in jets]
    else:
        pert = [(j.d2, j.d12, j.d22) for j in jets]
    args = []
    for j, (dv, da, db) in zip(jets, pert):
        args.append((j.v + 1j * _CSTEP * dv, j.d1 + 1j * _CSTEP * da, j.d2 + 1j * _CSTEP * db))
    (v11, a11, b11), (v12, a12, b12), (v22, a22, b22) = args
    out = christoffel_from_derivatives(v11, v12, v22, a11, b11, a12, b12, a22, b22)
    return tuple(np.imag(c) / _CSTEP for c in out)


def brioschi_from_jets(j11, j12, j22):
    """Gauss curvature from the metric jets by the two-determinant formula.

    The matrices carry doubled entries, so the prefactor is 1 / (8 det^2).
    """
    E, F, G = j11.v, j12.v, j22.v
    det = E * G - F * F
    x = -j11.d22 + 2.0 * j12.d12 - j22.d11
    m1 = np.stack(
        [
            np.stack([x, j11.d1, 2.0 * j12.d1 - j11.d2], -1),
            np.stack([2.0 * j12.d2 - j22.d1, 2.0 * E, 2.0 * F], -1),
            np.stack([j22.d2, 2.0 * F, 2.0 * G], -1),
        ],
        -2,
    )
    zero = np.zeros_like(E)
    m2 = np.stack(
        [
            np.stack([zero, j11.d2, j22.d1], -1),
            np.stack([j11.d2, 2.0 * E, 2.0 * F], -1),
            np.stack([j22.d1, 2.0 * F, 2.0 * G], -1),
        ],
        -2,
    )
    return (np.linalg.det(m1) - np.linalg.det(m2)) / (8.0 * det**2)


def brioschi_curvature(g: SymmetricField, order: int = 2) -> ScalarField:
    _check_det(g.g11, g.g12, g.g22)
    return ScalarField(g.grid, brioschi_from_jets(*g.jets(order)))


def riemann_R1212(g: SymmetricField, order: int = 2) -> ScalarField:
    """``R_1212 = g_2m (d_2 G^m_11 - d_1 G^m_12 + G^n_11 G^m_n2 - G^n_12 G^m_n1)``."""
    _check_det(g.g11, g.g12, g.g22)
    jets = g.jets(order)
    G = christoffel_from_derivatives(*_christoffel_args(*jets))
    D1 = _christoffel_derivative(jets, 0)
    D2 = _christoffel_derivative(jets, 1)
    names = ("1_11", "1_12", "1_22", "2_11", "2_12", "2_22")
    sym = dict(zip(names, G))
    d1s = dict(zip(names, D1))
    d2s = dict(zip(names, D2))

    def gam(m, i, j):
        i, j = min(i, j), max(i, j)
        return sym[f"{m}_{i}{j}"]

    def term(m):
        val = d2s[f"{m}_11"] - d1s[f"{m}_12"]
        for n in (1, 2):
            val = val + gam(n, 1, 1) * gam(m, n, 2) - gam(n, 1, 2) * gam(m, n, 1)
        return val

    r = jets[1].v * term(1) + jets[2].v * term(2)
    return ScalarField(g.grid, r)


def codazzi_from_parts(L, M, N, dL, dM, dN, G):
    """Residuals from values, gradients ``(d1, d2)`` of the forms and the six symbols."""
    g1_11, g1_12, g1_22, g2_11, g2_12, g2_22 = G
    r1 = dN[0] - dM[1] + g1_22 * L - 2.0 * g1_12 * M + g1_11 * N
    r2 = dM[0] - dL[1] - g2_22 * L + 2.0 * g2_12 * M - g2_11 * N
    return r1, r2


def codazzi_residual(ff: FundamentalForm, gam: ChristoffelField, order: int = 2):
    grid = check_same_grid(ff, gam)
    jL, jM, jN = ff.jets(order)
    r1, r2 = codazzi_from_parts(
        jL.v, jM.v, jN.v, jL.grad(), jM.grad(), jN.grad(), gam.components()
    )
    return ScalarField(grid, r1), ScalarField(grid, r2)


def gauss_residual(ff: FundamentalForm, kappa: ScalarField) -> ScalarField:
    grid = check_same_grid(ff, kappa)
    return ScalarField(grid, ff.L * ff.N - ff.M**2 - kappa.values)


# Fixtures


def sphere_chart(grid: Grid2D, R: float = 1.0, analytic: bool = False) -> Immersion:
    """Upper-hemisphere graph ``(x1, x2, sqrt(R^2 - x1^2 - x2^2))``."""
    X1, X2 = grid.mesh()
    if np.any(X1**2 + X2**2 >= R**2):
        raise ValidationError("chart leaves the hemisphere")

    def closure(X1, X2):
        return _graph_jets(X1, X2, *_sphere_height(X1, X2, R))

    z = _sphere_height(X1, X2, R)[0]
    y = np.stack([X1, X2, z], -1)
    return Immersion(grid, y, closure=closure if analytic else None)


def _sphere_height(X1, X2, R):
    s = np.sqrt(R**2 - X1**2 - X2**2)
    z1, z2 = -X1 / s, -X2 / s
    z11 = -(R**2 - X2**2) / s**3
    z22 = -(R**2 - X1**2) / s**3
    z12 = -X1 * X2 / s**3
    s5 = s**5
    z111 = -3.0 * X1 * (R**2 - X2**2) / s5
    z112 = _z112(X1, X2, R, s)
    z122 = _z112(X2, X1, R, s)
    z222 = -3.0 * X2 * (R**2 - X1**2) / s5
    return s, (z1, z2), (z11, z12, z22), (z111, z112, z122, z222)


def _z112(X1, X2, R, s):
    # d/dx2 of -(R^2 - x2^2)/s^3
    return (2.0 * X2 * s**2 - 3.0 * X2 * (R**2 - X2**2)) / s**5


def _graph_jets(X1, X2, z, grad, hess, third):
    """Derivative dict of ``(x1, x2, z(x1, x2))``."""
    shape = X1.shape
    y = np.stack([X1, X2, z], -1)
    dy = np.zeros(shape + (3, 2))
    dy[..., 0, 0] = 1.0
    dy[..., 1, 1] = 1.0
    dy[..., 2, 0], dy[..., 2, 1] = grad
    d2y = np.zeros(shape + (3, 2, 2))
    z11, z12, z22 = hess
    d2y[..., 2, 0, 0] = z11
    d2y[..., 2, 0, 1] = d2y[..., 2, 1, 0] = z12
    d2y[..., 2, 1, 1] = z22
    d3y = np.zeros(shape + (3, 2, 2, 2))
    z111, z112, z122, z222 = third
    for idx, val in (
        ((0, 0, 0), z111),
        ((0, 0, 1), z112),
        ((0, 1, 0), z112),
        ((1, 0, 0), z112),
        ((0, 1, 1), z122),
        ((1, 0, 1), z122),
        ((1, 1, 0), z122),
        ((1, 1, 1), z222),
    ):
        d3y[(Ellipsis, 2) + idx] = val
    return {"y": y, "dy": dy, "d2y": d2y, "d3y": d3y}


def sphere_metric_closure(R: float = 1.0):
    """Closure for the induced metric of :func:`sphere_chart`."""

    def closure(X1, X2):
        return _metric_closure_from(lambda a, b: _graph_jets(a, b, *_sphere_height(a, b, R)))(X1, X2)

    return closure
