"""Continuum mechanics through the fundamental-form dictionary.

Stresses enter the forms as ``L = rho v^2 - T22``, ``M = T12 - rho u v`` and
``N = rho u^2 - T11``, so ``LN - M^2`` is the positivity expression
``det T + 2 rho u v T12 - rho v^2 T11 - rho u^2 T22``.  The degenerate (developable)
image gives steady-momentum fields with ``rho`` linear in time.  For the
Neo-Hookean law ``T = rho F F^T`` with ``Z = -rho0`` the shear ansatz
``x1 = X1 + w(X2 + s1 t)``, ``x2 = X2 + s2 t`` solves the reduced system and the
wave equation; it is steady on the current configuration iff ``s1 = s2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .errors import NonpositiveDensity, ValidationError
from .fluid import StressField
from .geometry import (
    ChristoffelField,
    FundamentalForm,
    SymmetricField,
    brioschi_curvature,
    christoffel,
    codazzi_residual,
)
from .grid import Grid2D, ScalarField, _frozen, check_same_grid, diff

STEADY_TOL = 1e-10


def _vals(x):
    return x.values if isinstance(x, ScalarField) else np.asarray(x, dtype=float)


# Stress dictionary


def lmn_from_stress(rho, u, v, T: StressField) -> FundamentalForm:
    r, uu, vv = (_vals(a) for a in (rho, u, v))
    L = r * vv**2 - T.T22
    M = T.T12 - r * uu * vv
    N = r * uu**2 - T.T11
    return FundamentalForm(T.grid, L, M, N)


def positivity_condition(rho, u, v, T: StressField) -> ScalarField:
    """``det T + 2 rho u v T12 - rho v^2 T11 - rho u^2 T22``, equal to ``LN - M^2``."""
    r, uu, vv = (_vals(a) for a in (rho, u, v))
    det = T.T11 * T.T22 - T.T12**2
    val = det + 2.0 * r * uu * vv * T.T12 - r * vv**2 * T.T11 - r * uu**2 * T.T22
    return ScalarField(T.grid, val)


@dataclass(frozen=True)
class DeformationState:
    """Deformation gradient ``F`` with shape ``(nx, ny, 2, 2)`` and reference density."""

    grid: Grid2D
    F: np.ndarray
    rho0: float = 1.0

    def __post_init__(self):
        F = np.broadcast_to(np.asarray(self.F, dtype=float), self.grid.shape + (2, 2))
        if not np.all(np.isfinite(F)):
            raise ValidationError("F contains non-finite values")
        if not self.rho0 > 0:
            raise NonpositiveDensity("reference density must be positive")
        if np.any(np.linalg.det(F) <= 0):
            raise ValidationError("det F must be positive")
        object.__setattr__(self, "F", _frozen(F))

    @property
    def J(self):
        return np.linalg.det(self.F)

    @property
    def rho(self):
        return self.rho0 / self.J

    @property
    def B(self):
        return self.F @ np.swapaxes(self.F, -1, -2)


def neo_hookean_stress(ds: DeformationState) -> StressField:
    """Cauchy stress ``T = rho F F^T`` (no reference-stress correction)."""
    T = ds.rho[..., None, None] * ds.B
    return StressField(ds.grid, T[..., 0, 0], T[..., 0, 1], T[..., 1, 1])


# Motions


@dataclass(frozen=True)
class Motion:
    """Motion ``x(X, t)`` with derivative closures.

    Every closure takes ``(X1, X2, t)``.  ``position`` returns ``(..., 2)``,
    ``gradient`` the deformation gradient ``(..., 2, 2)`` with ``F[i, j] = dx_i/dX_j``,
    ``velocity`` ``(..., 2)``.  ``acceleration`` and ``laplacian`` return
    ``(..., 2)`` and are needed for the wave-equation residual; ``inverse(x1, x2, t)``
    returns the referential point occupying ``x`` at time ``t``.
    """

    position: Callable
    gradient: Callable
    velocity: Callable
    acceleration: Optional[Callable] = None
    laplacian: Optional[Callable] = None
    inverse: Optional[Callable] = None
    name: str = ""

    def F(self, X1, X2, t):
        F = self.gradient(X1, X2, t)
        if np.any(np.linalg.det(F) <= 0):
            raise ValidationError("det F must be positive")
        return F


@dataclass(frozen=True)
class WaveProfile:
    """Profile ``w`` with its first two derivatives (vectorized callables)."""

    w: Callable
    dw: Callable
    d2w: Callable


def sine_profile(amplitude: float = 1.0, k: float = 1.0) -> WaveProfile:
    return WaveProfile(
        lambda s: amplitude * np.sin(k * s),
        lambda s: amplitude * k * np.cos(k * s),
        lambda s: -amplitude * k * k * np.sin(k * s),
    )


def band_profile(a: float, b: float) -> WaveProfile:
    """Smoothed shear band: slope ramps by ``a`` over a layer of width ``b``."""
    if not (a > 0 and b > 0):
        raise ValidationError("band height and width must be positive")
    return WaveProfile(
        lambda s: 0.5 * a * (s + b * np.log(np.cosh(s / b))),
        lambda s: 0.5 * a * (1.0 + np.tanh(s / b)),
        lambda s: 0.5 * a / (b * np.cosh(s / b) ** 2),
    )


ZERO_PROFILE = WaveProfile(np.zeros_like, np.zeros_like, np.zeros_like)


def _sign(s):
    if s in (1, -1, "+", "-"):
        return 1.0 if s in (1, "+") else -1.0
    raise ValidationError("signs must be +1 or -1")


def traveling_wave_motion(w: WaveProfile, sign_pair=(1, 1)) -> Motion:
    """``x1 = X1 + w(X2 + s1 t)``, ``x2 = X2 + s2 t`` for ``sign_pair = (s1, s2)``."""
    s1, s2 = (_sign(s) for s in sign_pair)

    def position(X1, X2, t):
        return np.stack([X1 + w.w(X2 + s1 * t), X2 + s2 * t + 0.0 * X1], -1)

    def gradient(X1, X2, t):
        X1, X2 = np.broadcast_arrays(X1, X2)
        F = np.zeros(X1.shape + (2, 2))
        F[..., 0, 0] = 1.0
        F[..., 0, 1] = w.dw(X2 + s1 * t)
        F[..., 1, 1] = 1.0
        return F

    def velocity(X1, X2, t):
        X1, X2 = np.broadcast_arrays(X1, X2)
        return np.stack([s1 * w.dw(X2 + s1 * t), np.full(X1.shape, s2)], -1)

    def acceleration(X1, X2, t):
        X1, X2 = np.broadcast_arrays(X1, X2)
        return np.stack([w.d2w(X2 + s1 * t), np.zeros(X1.shape)], -1)

    def laplacian(X1, X2, t):
        X1, X2 = np.broadcast_arrays(X1, X2)
        return np.stack([w.d2w(X2 + s1 * t), np.zeros(X1.shape)], -1)

    def inverse(x1, x2, t):
        X2 = x2 - s2 * t
        return np.stack([x1 - w.w(X2 + s1 * t), X2], -1)

    label = "".join("+" if s > 0 else "-" for s in (s1, s2))
    return Motion(position, gradient, velocity, acceleration, laplacian, inverse, name=f"wave({label})")


def rescaled_motion(m: Motion, lam: float) -> Motion:
    """``x_lam(X, t) = lam x(X / lam, t / lam)``; first derivatives are unchanged."""
    if not lam > 0:
        raise ValidationError("scale must be positive")

    def wrap(f, power):
        if f is None:
            return None
        return lambda X1, X2, t: lam**power * f(X1 / lam, X2 / lam, t / lam)

    inverse = None
    if m.inverse is not None:
        inverse = lambda x1, x2, t: lam * m.inverse(x1 / lam, x2 / lam, t / lam)
    return Motion(
        wrap(m.position, 1),
        wrap(m.gradient, 0),
        wrap(m.velocity, 0),
        wrap(m.acceleration, -1),
        wrap(m.laplacian, -1),
        inverse,
        name=f"{m.name}*{lam:g}",
    )


def _times_mesh(grid, t):
    X1, X2 = grid.mesh()
    return X1, X2, float(t)


def es2_residual(m: Motion, grid: Grid2D, t: float, Z: Optional[Callable] = None, rho0: float = 1.0):
    """Residuals of the reduced Neo-Hookean system and of the caveat.

    Returns ``(r1, r2, r3, caveat)`` with
    ``r1 = (dt x2)^2 - |grad x2|^2``,
    ``r2 = (dt x1)^2 - |grad x1|^2 + (J / |grad x2|)^2``,
    ``r3 = Z(x2, t) |grad x2|^2 / rho0 + J`` and
    ``caveat = dt x1 dt x2 - grad x1 . grad x2``.  ``Z`` defaults to ``-rho0``.
    """
    X1, X2, t = _times_mesh(grid, t)
    F = m.F(X1, X2, t)
    vel = m.velocity(X1, X2, t)
    x = m.position(X1, X2, t)
    J = np.linalg.det(F)
    g1 = F[..., 0, :]
    g2 = F[..., 1, :]
    n2 = np.sum(g2 * g2, -1)
    if np.any(n2 <= 0):
        raise ValidationError("grad x2 vanishes; the reduced system needs |grad x2| > 0")
    z = -rho0 * np.ones_like(J) if Z is None else np.broadcast_to(Z(x[..., 1], t), J.shape)
    r1 = vel[..., 1] ** 2 - n2
    r2 = vel[..., 0] ** 2 - np.sum(g1 * g1, -1) + J**2 / n2
    r3 = z * n2 / rho0 + J
    cav = vel[..., 0] * vel[..., 1] - np.sum(g1 * g2, -1)
    return tuple(ScalarField(grid, r) for r in (r1, r2, r3, cav))


def _fd_wave_terms(m: Motion, X1, X2, t, h):
    acc = (m.position(X1, X2, t + h) - 2 * m.position(X1, X2, t) + m.position(X1, X2, t - h)) / h**2
    lap = (
        m.position(X1 + h, X2, t) + m.position(X1 - h, X2, t)
        + m.position(X1, X2 + h, t) + m.position(X1, X2 - h, t)
        - 4 * m.position(X1, X2, t)
    ) / h**2
    return acc, lap


def wave_equation_residual(m: Motion, grid: Grid2D, t: float, h: float = 1e-4):
    """``d_tt x_i - lap_X x_i`` for both components.

    Uses the motion's acceleration and Laplacian closures; without them falls back
    to central differences with step ``h``.
    """
    X1, X2, t = _times_mesh(grid, t)
    if m.acceleration is not None and m.laplacian is not None:
        acc, lap = m.acceleration(X1, X2, t), m.laplacian(X1, X2, t)
    else:
        acc, lap = _fd_wave_terms(m, X1, X2, t, h)
    r = acc - lap
    return ScalarField(grid, r[..., 0]), ScalarField(grid, r[..., 1])


@dataclass(frozen=True)
class SteadinessTrace:
    times: np.ndarray
    velocity: np.ndarray
    variation: float
    is_steady: bool


def current_config_steadiness(m: Motion, x0, times: Sequence[float], tol: float = STEADY_TOL) -> SteadinessTrace:
    """Spatial velocity at the fixed point ``x0`` over ``times``.

    The occupying material point comes from the motion's closed-form inverse.
    """
    if m.inverse is None:
        raise ValidationError("motion has no closed-form inverse")
    times = np.asarray(times, dtype=float)
    x1, x2 = float(x0[0]), float(x0[1])
    trace = np.empty((len(times), 2))
    for k, t in enumerate(times):
        X = m.inverse(np.array(x1), np.array(x2), t)
        trace[k] = m.velocity(X[..., 0], X[..., 1], t)
    variation = float(np.max(np.ptp(trace, axis=0))) if len(times) else 0.0
    return SteadinessTrace(times, trace, variation, variation < tol)


# Degenerate image: steady momenta


@dataclass(frozen=True)
class ContinuumSeries:
    """Fields sampled at ``times``; arrays have shape ``(len(times), nx, ny)``."""

    grid: Grid2D
    times: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    gap: float = 0.0

    def momentum_drift(self) -> float:
        """Largest change of ``rho u`` or ``rho v`` from its initial value."""
        mu, mv = self.rho * self.u, self.rho * self.v
        return float(max(np.max(np.abs(mu - mu[0])), np.max(np.abs(mv - mv[0]))))


def _rk4(rhs, y, t0, t1, max_step):
    n = max(1, math.ceil(abs(t1 - t0) / max_step))
    h = (t1 - t0) / n
    t = t0
    for _ in range(n):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, [a + h / 2 * b for a, b in zip(y, k1)])
        k3 = rhs(t + h / 2, [a + h / 2 * b for a, b in zip(y, k2)])
        k4 = rhs(t + h, [a + h * b for a, b in zip(y, k3)])
        y = [a + h / 6 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]
        t += h
    return y


def _check_times(times):
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValidationError("times must be a nondecreasing list starting at t >= 0")
    return times


def degenerate_continuum_fields(rho1, rho2, u0, v0, times, max_step: float = 1e-2) -> ContinuumSeries:
    """``rho = rho1 t + rho2`` and velocities from ``rho u_t = -rho1 u`` (RK4 from t = 0).

    Raises :class:`NonpositiveDensity` carrying the first time ``rho`` reaches zero.
    """
    grid = rho1.grid if isinstance(rho1, ScalarField) else rho2.grid
    r1, r2 = (np.broadcast_to(_vals(a), grid.shape) for a in (rho1, rho2))
    times = _check_times(times)
    if np.any(r2 <= 0):
        raise NonpositiveDensity("initial density must be positive", 0.0)
    T = times[-1]
    falling = r1 < 0
    if np.any(falling):
        t_zero = float(np.min(-r2[falling] / r1[falling]))
        if t_zero <= T:
            raise NonpositiveDensity(f"density vanishes at t = {t_zero:.6g}", t_zero)

    def rhs(t, y):
        rho = r1 * t + r2
        return [-r1 * y[0] / rho, -r1 * y[1] / rho]

    state = [np.broadcast_to(_vals(u0), grid.shape).astype(float), np.broadcast_to(_vals(v0), grid.shape).astype(float)]
    t = 0.0
    us, vs = [], []
    for tk in times:
        state = _rk4(rhs, state, t, tk, max_step)
        t = tk
        us.append(state[0])
        vs.append(state[1])
    rho = np.stack([r1 * tk + r2 for tk in times])
    return ContinuumSeries(grid, times, rho, np.stack(us), np.stack(vs))


# Mechanics from an evolving manifold


def static_surface(gam: ChristoffelField, ff: FundamentalForm) -> Callable:
    """Time-independent surface data for :func:`mechanics_from_manifold`."""
    check_same_grid(gam, ff)
    return lambda t: (gam, ff)


def _momentum_rhs(gam: ChristoffelField, ff: FundamentalForm):
    g1_11, g1_12, g1_22, g2_11, g2_12, g2_22 = gam.components()
    ru = g1_22 * ff.L - 2.0 * g1_12 * ff.M + g1_11 * ff.N
    rv = g2_22 * ff.L - 2.0 * g2_12 * ff.M + g2_11 * ff.N
    return ru, rv


def mechanics_from_manifold(
    surface: Callable,
    rho0,
    u0,
    v0,
    times,
    max_step: float = 1e-2,
    order: int = 2,
) -> ContinuumSeries:
    """Density and velocity carried by an evolving surface.

    ``surface(t)`` returns ``(ChristoffelField, FundamentalForm)`` at time ``t``; a
    callable rather than samples so that RK4 stages see the data at their own times.
    Momenta solve ``dt m = (Gamma^k_22 L - 2 Gamma^k_12 M + Gamma^k_11 N)_k``,
    density ``-dt rho = div m`` and velocities the same law with ``m = rho (u, v)``.
    All five fields advance together by RK4.  ``gap`` in the result is
    ``max |m - rho (u, v)|`` over all output times.
    """
    gam0, _ = surface(0.0)
    grid = gam0.grid
    times = _check_times(times)
    shape = grid.shape
    r = np.broadcast_to(_vals(rho0), shape).astype(float)
    if np.any(r <= 0):
        raise NonpositiveDensity("initial density must be positive", 0.0)
    u = np.broadcast_to(_vals(u0), shape).astype(float)
    v = np.broadcast_to(_vals(v0), shape).astype(float)

    def div(mu, mv):
        return diff(mu, 0, grid.h1, order) + diff(mv, 1, grid.h2, order)

    def rhs(t, y):
        mu, mv, rho, uu, vv = y
        ru, rv = _momentum_rhs(*surface(t))
        d = div(mu, mv)
        return [ru, rv, -d, (ru + uu * d) / rho, (rv + vv * d) / rho]

    state = [r * u, r * v, r, u, v]
    t = 0.0
    out = {"rho": [], "u": [], "v": []}
    gap = 0.0
    for tk in times:
        n = max(1, math.ceil(abs(tk - t) / max_step))
        h = (tk - t) / n if n else 0.0
        for _ in range(n):
            state = _rk4(rhs, state, t, t + h, abs(h) + 1.0)
            t += h
            if np.any(state[2] <= 0):
                raise NonpositiveDensity(f"density vanishes near t = {t:.6g}", t)
        t = tk
        mu, mv, rho, uu, vv = state
        gap = max(gap, float(np.max(np.abs(mu - rho * uu))), float(np.max(np.abs(mv - rho * vv))))
        out["rho"].append(rho)
        out["u"].append(uu)
        out["v"].append(vv)
    return ContinuumSeries(grid, times, *(np.stack(out[k]) for k in ("rho", "u", "v")), gap=gap)


# Constrained evolution residuals


@dataclass(frozen=True)
class Rates:
    """Time derivatives entering the mechanical balances; zero (steady) by default."""

    rho: np.ndarray = 0.0
    rho_u: np.ndarray = 0.0
    rho_v: np.ndarray = 0.0
    F: np.ndarray = 0.0


def neo_hookean_rule(Lv, rho, F, g):
    """``T = rho F F^T``; the velocity gradient and metric do not enter."""
    T = rho[..., None, None] * (F @ np.swapaxes(F, -1, -2))
    return T[..., 0, 0], T[..., 0, 1], T[..., 1, 1]


def lmn_identification(S11, S12, S22):
    """Forms from ``S = rho u (x) u - T``: ``(L, M, N) = (S22, -S12, S11)``."""
    return S22, -S12, S11


def constrained_system_residual(
    grid: Grid2D,
    rho,
    u,
    v,
    F,
    g: SymmetricField,
    ff: FundamentalForm,
    stress_rule: Callable = neo_hookean_rule,
    f_rule: Callable = lmn_identification,
    rates: Rates = Rates(),
    order: int = 2,
) -> Dict[str, ScalarField]:
    """Pointwise residuals of the mechanical balances and the geometric constraints.

    Keys: ``mass``, ``kinematics_ij``, ``momentum_1``, ``momentum_2``,
    ``codazzi_1``, ``codazzi_2``, ``gauss`` and ``identification_11/12/22``.
    ``stress_rule(Lv, rho, F, g)`` returns ``(T11, T12, T22)``;
    ``f_rule(S11, S12, S22)`` returns the forms that ``(L, M, N)`` must equal.
    """
    check_same_grid(g, ff)
    if g.grid != grid:
        raise ValidationError("fields live on a different grid")
    r, uu, vv = (np.broadcast_to(_vals(a), grid.shape) for a in (rho, u, v))
    F = np.broadcast_to(np.asarray(F, dtype=float), grid.shape + (2, 2))
    h1, h2 = grid.h1, grid.h2

    def d1(a):
        return diff(a, 0, h1, order)

    def d2(a):
        return diff(a, 1, h2, order)

    def rate(a):
        return np.broadcast_to(np.asarray(a, dtype=float), grid.shape)

    vel = (uu, vv)
    Lv = np.stack([np.stack([d1(uu), d2(uu)], -1), np.stack([d1(vv), d2(vv)], -1)], -2)
    out = {"mass": d1(r * uu) + d2(r * vv) + rate(rates.rho)}
    dtF = np.broadcast_to(np.asarray(rates.F, dtype=float), grid.shape + (2, 2))
    LF = Lv @ F
    for i in range(2):
        for j in range(2):
            adv = d1(F[..., i, j]) * vel[0] + d2(F[..., i, j]) * vel[1]
            out[f"kinematics_{i + 1}{j + 1}"] = adv - LF[..., i, j] + dtF[..., i, j]
    T11, T12, T22 = (np.broadcast_to(np.asarray(a, dtype=float), grid.shape) for a in stress_rule(Lv, r, F, g))
    S11, S12, S22 = r * uu**2 - T11, r * uu * vv - T12, r * vv**2 - T22
    out["momentum_1"] = d1(S11) + d2(S12) + rate(rates.rho_u)
    out["momentum_2"] = d1(S12) + d2(S22) + rate(rates.rho_v)
    c1, c2 = codazzi_residual(ff, christoffel(g, order), order)
    out["codazzi_1"] = c1.values
    out["codazzi_2"] = c2.values
    out["gauss"] = ff.L * ff.N - ff.M**2 - brioschi_curvature(g, order).values
    tL, tM, tN = f_rule(S11, S12, S22)
    out["identification_11"] = ff.L - tL
    out["identification_12"] = ff.M - tM
    out["identification_22"] = ff.N - tN
    return {k: ScalarField(grid, val) for k, val in out.items()}
