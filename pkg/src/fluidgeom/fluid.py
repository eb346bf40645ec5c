"""Dictionary between planar fluid states and second fundamental forms.

Incompressible states map to forms by ``L = v^2 + p``, ``M = -uv``,
``N = u^2 + p``; the Gauss equation ``LN - M^2 = kappa`` then reads
``p^2 + p q^2 = kappa`` with ``q^2 = u^2 + v^2``.  Compressible states use the
momentum-flux analogue with ``p = rho^gamma / gamma``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    CFLViolation,
    NegativeDiscriminant,
    NegativeRadicand,
    NonpositiveCurvature,
    NonpositiveDensity,
    ValidationError,
)
from .geometry import ChristoffelField, FundamentalForm
from .grid import Grid2D, Jet, ScalarField, _frozen, check_same_grid, diff, stencil_jet


@dataclass(frozen=True)
class FluidState:
    """Velocity and pressure samples; ``closure(X1, X2)`` returns Jets of (u, v, p)."""

    grid: Grid2D
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    closure: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("u", "v", "p"):
            vals = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.grid.shape)
            if not np.all(np.isfinite(vals)):
                raise ValidationError(f"{name} contains non-finite values")
            object.__setattr__(self, name, _frozen(vals))

    @property
    def q2(self):
        return self.u**2 + self.v**2

    def jets(self, order=2):
        if self.closure is not None:
            return self.closure(*self.grid.mesh())
        return tuple(stencil_jet(c, self.grid, order) for c in (self.u, self.v, self.p))


@dataclass(frozen=True)
class CompressibleState:
    grid: Grid2D
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        if self.gamma < 1:
            raise ValidationError("adiabatic exponent must be >= 1")
        for name in ("rho", "u", "v"):
            vals = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.grid.shape)
            if not np.all(np.isfinite(vals)):
                raise ValidationError(f"{name} contains non-finite values")
            object.__setattr__(self, name, _frozen(vals))
        if np.any(self.rho <= 0):
            raise NonpositiveDensity("density must be positive")

    @property
    def q2(self):
        return self.u**2 + self.v**2

    @property
    def p(self):
        return self.rho**self.gamma / self.gamma


@dataclass(frozen=True)
class StressField:
    grid: Grid2D
    T11: np.ndarray
    T12: np.ndarray
    T22: np.ndarray

    def __post_init__(self):
        for name in ("T11", "T12", "T22"):
            vals = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), self.grid.shape)
            object.__setattr__(self, name, _frozen(vals))


@dataclass(frozen=True)
class GromovTriple:
    """Per-node combinations ``(r1, r2, r3)`` to be split as ``U_i U_j + P delta_ij``."""

    r1: np.ndarray
    r2: np.ndarray
    r3: np.ndarray


def _vals(x):
    return x.values if isinstance(x, ScalarField) else np.asarray(x, dtype=float)


def _like(template, values):
    if isinstance(template, ScalarField):
        return ScalarField(template.grid, values)
    return values


def _split_squares(d, m2):
    """Return ``(a, b)`` with ``a - b = d``, ``a b = m2``, ``a, b >= 0``, cancellation free.

    ``a = (d + sqrt(d^2 + 4 m2)) / 2`` and ``b = (-d + sqrt(d^2 + 4 m2)) / 2``.
    """
    s = np.sqrt(d * d + 4.0 * m2)
    big = 0.5 * (np.abs(d) + s)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.where(big > 0, m2 / np.where(big > 0, big, 1.0), 0.0)
    a = np.where(d >= 0, big, small)
    b = np.where(d >= 0, small, big)
    return a, b


def _product_jet(a: Jet, b: Jet) -> Jet:
    return Jet(
        a.v * b.v,
        a.d1 * b.v + a.v * b.d1,
        a.d2 * b.v + a.v * b.d2,
        a.d11 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d11,
        a.d12 * b.v + a.d1 * b.d2 + a.d2 * b.d1 + a.v * b.d12,
        a.d22 * b.v + 2.0 * a.d2 * b.d2 + a.v * b.d22,
    )


def _lin_jet(*terms) -> Jet:
    """Linear combination of jets given as ``(coefficient, jet)`` pairs."""
    out = {}
    for name in ("v", "d1", "d2", "d11", "d12", "d22"):
        out[name] = sum(c * getattr(j, name) for c, j in terms)
    return Jet(**out)


# Incompressible dictionary


def lmn_from_fluid(s: FluidState) -> FundamentalForm:
    L = s.v**2 + s.p
    M = -s.u * s.v
    N = s.u**2 + s.p
    closure = None
    if s.closure is not None:
        base = s.closure

        def closure(X1, X2):
            ju, jv, jp = base(X1, X2)
            return (
                _lin_jet((1.0, _product_jet(jv, jv)), (1.0, jp)),
                _lin_jet((-1.0, _product_jet(ju, jv))),
                _lin_jet((1.0, _product_jet(ju, ju)), (1.0, jp)),
            )

    return FundamentalForm(s.grid, L, M, N, closure=closure)


def pressure_from_curvature(q2, kappa):
    """Root ``p = (-q^2 + sqrt(q^4 + 4 kappa)) / 2`` of ``p^2 + p q^2 = kappa``."""
    q2v, kv = _vals(q2), _vals(kappa)
    disc = q2v**2 + 4.0 * kv
    scale = np.maximum(1.0, q2v**2 + 4.0 * np.abs(kv))
    if np.any(disc < -1e-12 * scale):
        raise NegativeDiscriminant("q^4 + 4 kappa < 0")
    root = np.sqrt(np.maximum(disc, 0.0))
    # cancellation-free form when q2 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(q2v > 0, 2.0 * kv / (q2v + root), 0.5 * (-q2v + root))
    p = np.where(np.isfinite(p), p, 0.5 * (-q2v + root))
    return _like(q2 if isinstance(q2, ScalarField) else kappa, p)


def fluid_from_lmn(ff: FundamentalForm):
    """Speeds ``(|u|, |v|)``; signs must come from elsewhere."""
    u2, v2 = _split_squares(ff.N - ff.L, ff.M**2)
    return ScalarField(ff.grid, np.sqrt(u2)), ScalarField(ff.grid, np.sqrt(v2))


def apply_sign_hint(speed_u, speed_v, M, sign_u=1.0):
    """Signed velocities from speeds using ``sign(u v) = -sign(M)``."""
    su = np.sign(sign_u) * np.ones_like(np.asarray(M, dtype=float))
    sv = np.where(np.asarray(M) > 0, -su, su)
    return su * _vals(speed_u), sv * _vals(speed_v)


def euler_residual(s: FluidState, dtu, dtv, order: int = 2):
    """Residuals of the momentum equations and of the divergence."""
    ju, jv, jp = s.jets(order)
    r1 = _vals(dtu) + 2.0 * s.u * ju.d1 + jp.d1 + ju.d2 * s.v + s.u * jv.d2
    r2 = _vals(dtv) + ju.d1 * s.v + s.u * jv.d1 + 2.0 * s.v * jv.d2 + jp.d2
    r3 = ju.d1 + jv.d2
    if s.closure is None:
        g = s.grid
        r1 = _vals(dtu) + diff(s.u**2 + s.p, 0, g.h1, order) + diff(s.u * s.v, 1, g.h2, order)
        r2 = _vals(dtv) + diff(s.u * s.v, 0, g.h1, order) + diff(s.v**2 + s.p, 1, g.h2, order)
    return tuple(ScalarField(s.grid, r) for r in (r1, r2, r3))


def pressure_poisson_residual(s: FluidState, order: int = 2) -> ScalarField:
    """``d11(u^2) + 2 d12(uv) + d22(v^2) + lap p``."""
    if s.closure is not None:
        ju, jv, jp = s.jets(order)
        uu, uv, vv = _product_jet(ju, ju), _product_jet(ju, jv), _product_jet(jv, jv)
    else:
        uu, uv, vv, jp = (
            stencil_jet(a, s.grid, order) for a in (s.u**2, s.u * s.v, s.v**2, s.p)
        )
    r = uu.d11 + 2.0 * uv.d12 + vv.d22 + jp.d11 + jp.d22
    return ScalarField(s.grid, r)


def geometric_flow_from_parts(L, M, N, G):
    g1_11, g1_12, g1_22, g2_11, g2_12, g2_22 = G
    rhs_u = g1_22 * L - 2.0 * g1_12 * M + g1_11 * N
    rhs_v = g2_22 * L - 2.0 * g2_12 * M + g2_11 * N
    return rhs_u, rhs_v


def geometric_flow_rhs(ff: FundamentalForm, gam: ChristoffelField):
    """Time derivatives ``(d_t u, d_t v)`` prescribed by the surface."""
    grid = check_same_grid(ff, gam)
    ru, rv = geometric_flow_from_parts(ff.L, ff.M, ff.N, gam.components())
    return ScalarField(grid, ru), ScalarField(grid, rv)


def divergence_constraint_residual(ff, gam, order: int = 2) -> ScalarField:
    ru, rv = geometric_flow_rhs(ff, gam)
    g = ru.grid
    return ScalarField(g, diff(ru.values, 0, g.h1, order) + diff(rv.values, 1, g.h2, order))


# Compressible dictionary


def lmn_from_compressible(s: CompressibleState) -> FundamentalForm:
    p = s.p
    return FundamentalForm(
        s.grid, s.rho * s.v**2 + p, -s.rho * s.u * s.v, s.rho * s.u**2 + p
    )


def compressible_from_lmn(ff: FundamentalForm, rho):
    r = _vals(rho)
    if np.any(r <= 0):
        raise NonpositiveDensity("density must be positive")
    u2, v2 = _split_squares(ff.N - ff.L, ff.M**2)
    return ScalarField(ff.grid, np.sqrt(u2 / r)), ScalarField(ff.grid, np.sqrt(v2 / r))


def compressible_gauss_relation(rho, q2, gamma):
    """``LN - M^2`` of the compressible map: ``p^2 + p rho q^2`` with ``p = rho^gamma/gamma``."""
    p = rho**gamma / gamma
    return p * p + p * rho * q2


def rho_from_kappa(kappa, q2, gamma: float = 1.0, tol: float = 1e-12, max_iter: int = 200):
    """Positive density solving the compressible Gauss relation for ``kappa``."""
    kv, qv = _vals(kappa), _vals(q2)
    if np.any(kv <= 0):
        raise NonpositiveCurvature("kappa must be positive")
    if gamma == 1.0:
        rho = np.sqrt(kv / (1.0 + qv))
    else:
        kv, qv = np.broadcast_arrays(kv, qv)
        lo = np.zeros_like(kv, dtype=float)
        hi = np.ones_like(kv, dtype=float)
        while True:
            short = compressible_gauss_relation(hi, qv, gamma) < kv
            if not short.any():
                break
            hi = np.where(short, 2.0 * hi, hi)
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            below = compressible_gauss_relation(mid, qv, gamma) < kv
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= tol * np.maximum(1.0, hi)):
                break
        rho = 0.5 * (lo + hi)
    return _like(kappa if isinstance(kappa, ScalarField) else q2, rho)


def _van_leer(a, b):
    prod = a * b
    return np.where(prod > 0, 2 * prod / np.where(prod > 0, a + b, 1.0), 0.0)


def _flux_divergence(w, u, v, h1, h2, boundary, scheme):
    """Conservative ``div(w (u, v))`` with upwind fluxes at faces between nodes.

    ``scheme`` is ``"upwind"`` (piecewise constant) or ``"muscl"`` (van Leer limited
    linear reconstruction).  Boundaries are ``"periodic"`` or ``"extrapolate"``.
    """
    mode = {"periodic": "wrap", "extrapolate": "edge"}.get(boundary)
    if mode is None:
        raise ValidationError("boundary must be 'periodic' or 'extrapolate'")
    out = np.zeros_like(w)
    for axis, vel, h in ((0, u, h1), (1, v, h2)):
        wp = np.pad(np.moveaxis(w, axis, 0), [(2, 2), (0, 0)], mode=mode)
        vp = np.pad(np.moveaxis(vel, axis, 0), [(1, 1), (0, 0)], mode=mode)
        if scheme == "muscl":
            slope = _van_leer(wp[1:-1] - wp[:-2], wp[2:] - wp[1:-1])
        elif scheme == "upwind":
            slope = np.zeros_like(wp[1:-1])
        else:
            raise ValidationError("scheme must be 'upwind' or 'muscl'")
        cells = wp[1:-1]
        wl = (cells + 0.5 * slope)[:-1]
        wr = (cells - 0.5 * slope)[1:]
        vf = 0.5 * (vp[:-1] + vp[1:])
        flux = np.where(vf > 0, vf * wl, vf * wr)
        out += np.moveaxis((flux[1:] - flux[:-1]) / h, 0, axis)
    return out


def transport_w_step(w, u, v, dt, h1, h2, boundary="periodic", scheme="muscl"):
    """One step of ``d_t w + div(w (u, v)) = 0``.

    ``"muscl"`` uses a limited linear reconstruction with two-stage strong-stability
    preserving Runge-Kutta; ``"upwind"`` is first order with forward Euler.
    """
    cfl = dt * max(np.max(np.abs(u)) / h1, np.max(np.abs(v)) / h2)
    if cfl > 0.5 + 1e-12:
        raise CFLViolation(f"CFL number {cfl:.3f} exceeds 0.5")
    w = np.asarray(w, dtype=float)

    def op(a):
        return _flux_divergence(a, u, v, h1, h2, boundary, scheme)

    w1 = w - dt * op(w)
    if scheme == "upwind":
        return w1
    return 0.5 * (w + w1 - dt * op(w1))


def kappa_transport_step(kappa: ScalarField, s, dt: float, s_next=None, boundary="periodic", scheme="muscl"):
    """Advance ``kappa`` by transporting ``w = sqrt(kappa / (1 + q^2))`` one step.

    ``s_next`` supplies ``q^2`` at the new time level (defaults to ``s``).
    """
    if np.any(kappa.values <= 0):
        raise NonpositiveCurvature("kappa must be positive")
    g = kappa.grid
    w = np.sqrt(kappa.values / (1.0 + s.q2))
    w_new = transport_w_step(w, s.u, s.v, dt, g.h1, g.h2, boundary, scheme)
    if np.any(w_new <= 0):
        raise NonpositiveCurvature("transport produced nonpositive curvature")
    nxt = s if s_next is None else s_next
    return ScalarField(g, w_new**2 * (1.0 + nxt.q2))


def gromov_identification(t: GromovTriple, tol: float = 1e-12):
    """Split ``[[r1, r2], [r2, r3]] = U U^T + P I`` with the smaller eigenvalue ``P``."""
    r1, r2, r3 = (np.asarray(a, dtype=float) for a in (t.r1, t.r2, t.r3))
    d = r1 - r3
    a, b = _split_squares(d, r2 * r2)
    P = r1 - a
    if np.any(a < -tol) or np.any(b < -tol):
        raise NegativeRadicand("r - P is negative")
    return np.sqrt(a), np.sqrt(b), P


# Fixtures


def taylor_green_fixture(grid: Grid2D, p_shift: float = 1.0, analytic: bool = False) -> FluidState:
    """Steady Taylor-Green vortex with pressure shifted to stay positive.

    The unshifted pressure has minimum -1/2, so any ``p_shift > 1/2`` works.
    """
    if p_shift <= 0.5:
        raise ValidationError("p_shift must exceed 1/2 to keep the pressure positive")

    def closure(X1, X2):
        s1, c1, s2, c2 = np.sin(X1), np.cos(X1), np.sin(X2), np.cos(X2)
        ju = Jet(s1 * c2, c1 * c2, -s1 * s2, -s1 * c2, -c1 * s2, -s1 * c2)
        jv = Jet(-c1 * s2, s1 * s2, -c1 * c2, c1 * s2, s1 * c2, c1 * s2)
        c21, c22 = np.cos(2 * X1), np.cos(2 * X2)
        jp = Jet(
            0.25 * (c21 + c22) + p_shift,
            -0.5 * np.sin(2 * X1),
            -0.5 * np.sin(2 * X2),
            -c21,
            np.zeros_like(X1),
            -c22,
        )
        return ju, jv, jp

    ju, jv, jp = closure(*grid.mesh())
    return FluidState(grid, ju.v, jv.v, jp.v, closure=closure if analytic else None)
