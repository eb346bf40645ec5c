"""Uniform grids, scalar fields, derivative jets and finite-difference stencils.

Arrays are indexed ``[i, j]`` with axis 0 along x1 and axis 1 along x2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .errors import GridMismatch, ValidationError


@dataclass(frozen=True)
class Grid2D:
    """Uniform rectangular node grid."""

    nx: int
    ny: int
    h1: float
    h2: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 5 or self.ny < 5:
            raise ValidationError("grid needs at least 5 nodes per direction")
        if not (self.h1 > 0 and self.h2 > 0):
            raise ValidationError("grid spacings must be positive")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def from_extent(cls, x1_range, x2_range, nx, ny):
        """Grid with ``nx`` x ``ny`` nodes covering the closed box."""
        (a1, b1), (a2, b2) = x1_range, x2_range
        return cls(nx, ny, (b1 - a1) / (nx - 1), (b2 - a2) / (ny - 1), (a1, a2))

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def x1(self):
        return self.origin[0] + self.h1 * np.arange(self.nx)

    @property
    def x2(self):
        return self.origin[1] + self.h2 * np.arange(self.ny)

    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def interior(self, pad=2):
        return (slice(pad, self.nx - pad), slice(pad, self.ny - pad))


@dataclass(frozen=True)
class Jet:
    """Value and derivatives up to second order of a scalar on the grid."""

    v: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d11: np.ndarray
    d12: np.ndarray
    d22: np.ndarray

    def grad(self):
        return (self.d1, self.d2)


Closure = Callable[[np.ndarray, np.ndarray], tuple]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScalarField:
    """Scalar samples on a grid; ``closure(X1, X2)`` optionally returns a :class:`Jet`."""

    grid: Grid2D
    values: np.ndarray
    closure: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        vals = np.broadcast_to(np.asarray(self.values, dtype=float), self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValidationError("scalar field contains non-finite values")
        object.__setattr__(self, "values", _frozen(vals))

    def jet(self, order=2) -> Jet:
        if self.closure is not None:
            return self.closure(*self.grid.mesh())
        return stencil_jet(self.values, self.grid, order)


def check_same_grid(*items):
    grids = [it.grid for it in items]
    for g in grids[1:]:
        if g != grids[0]:
            raise GridMismatch("operands live on different grids")
    return grids[0]


# Finite-difference machinery


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, deriv: int) -> np.ndarray:
    """Weights w with sum_k w_k f(x + o_k h) = h**deriv f^(deriv)(x) + O(h^(len-deriv))."""
    o = np.asarray(offsets, dtype=float)
    n = len(o)
    vander = np.vander(o, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(vander, rhs)


def diff(f: np.ndarray, axis: int, h: float, order: int = 2, deriv: int = 1) -> np.ndarray:
    """Derivative along ``axis``: central in the interior, one-sided near the ends."""
    if order not in (2, 4):
        raise ValidationError("stencil order must be 2 or 4")
    if deriv not in (1, 2):
        raise ValidationError("only first and second derivatives are supported")
    f = np.moveaxis(np.asarray(f), axis, 0)
    n = f.shape[0]
    p = order // 2
    width = order + deriv
    if n < width:
        raise ValidationError("too few nodes for the requested stencil")
    out = np.empty(f.shape, dtype=np.result_type(f, float))
    w = fd_weights(tuple(range(-p, p + 1)), deriv)
    acc = np.zeros((n - 2 * p,) + f.shape[1:], dtype=out.dtype)
    for k, wk in enumerate(w):
        if wk != 0.0:
            acc = acc + wk * f[k : n - 2 * p + k]
    out[p : n - p] = acc
    for i in range(p):
        wl = fd_weights(tuple(range(-i, width - i)), deriv)
        out[i] = np.tensordot(wl, f[:width], axes=(0, 0))
        wr = fd_weights(tuple(range(-(width - 1 - i), i + 1)), deriv)
        out[n - 1 - i] = np.tensordot(wr, f[n - width :], axes=(0, 0))
    out /= h**deriv
    return np.moveaxis(out, 0, axis)


def stencil_jet(values: np.ndarray, grid: Grid2D, order: int = 2) -> Jet:
    d1 = diff(values, 0, grid.h1, order)
    d2 = diff(values, 1, grid.h2, order)
    return Jet(
        v=np.asarray(values),
        d1=d1,
        d2=d2,
        d11=diff(values, 0, grid.h1, order, 2),
        d12=diff(d1, 1, grid.h2, order),
        d22=diff(values, 1, grid.h2, order, 2),
    )


def d1(f, grid, order=2):
    return diff(f, 0, grid.h1, order)


def d2(f, grid, order=2):
    return diff(f, 1, grid.h2, order)


def convergence_order(errors, hs):
    """Least-squares slope of log(error) against log(h)."""
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])
