"""Initial-data machinery for the metric generated by a prescribed second fundamental form.

Given ``(L, M, N)`` with ``LN - M^2 = kappa > 0`` we look for a metric ``g`` that
satisfies the Codazzi and Gauss equations.  The two Codazzi equations are solved
pointwise for ``(d1 g12, d2 g12)``; the Gauss equation and the cross-derivative
compatibility of that solution give two second-order equations for ``g11`` and
``g22``.  Marching is done along ``x1' = x1 + x2`` from the line ``x1' = 0``.

All tensor components are with respect to the original coordinates ``(x1, x2)``;
grids of the rotated chart are labelled by ``(x1', x2')``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.ndimage import gaussian_filter1d

from .errors import (
    DegenerateSymbol,
    DivisionByZeroForm,
    GridMismatch,
    LostSPD,
    ValidationError,
)
from .fluid import fluid_from_lmn, geometric_flow_from_parts
from .geometry import (
    FundamentalForm,
    MetricField,
    SymmetricField,
    brioschi_from_jets,
    christoffel_from_derivatives,
    codazzi_from_parts,
)
from .grid import Grid2D, Jet, ScalarField, diff, stencil_jet

_CSTEP = 1e-30
FORM_FLOOR = 1e-10


# Rotated chart


@dataclass(frozen=True)
class RotatedChart:
    """Grid in ``(x1', x2') = (x1 + x2, x1 - x2)`` around a base point ``x0``."""

    grid: Grid2D
    base: tuple = (0.0, 0.0)

    def to_original(self, S, T):
        return self.base[0] + 0.5 * (S + T), self.base[1] + 0.5 * (S - T)

    def to_rotated(self, X1, X2):
        a, b = X1 - self.base[0], X2 - self.base[1]
        return a + b, a - b

    def original_mesh(self):
        return self.to_original(*self.grid.mesh())

    @staticmethod
    def jet_to_original(j: Jet) -> Jet:
        """Convert a jet in ``(x1', x2')`` derivatives to ``(x1, x2)`` derivatives."""
        return Jet(
            j.v,
            j.d1 + j.d2,
            j.d1 - j.d2,
            j.d11 + 2.0 * j.d12 + j.d22,
            j.d11 - j.d22,
            j.d11 - 2.0 * j.d12 + j.d22,
        )


def strip_chart(
    n_line: int, half_width: float, steps: Optional[int] = None, ratio: float = 0.25, base=(0.0, 0.0), width: Optional[float] = None
):
    """Chart whose x2' line has ``n_line`` nodes on ``[-half_width, half_width]``.

    Give either the number of marching ``steps`` or the target strip ``width`` in x1'.
    """
    ht = 2.0 * half_width / (n_line - 1)
    if steps is None:
        if width is None:
            raise ValidationError("give steps or width")
        steps = max(int(round(width / (ratio * ht))), 4)
    grid = Grid2D(steps + 1, n_line, ratio * ht, ht, (0.0, -half_width))
    return RotatedChart(grid, tuple(base))


def form_source(ff: FundamentalForm) -> Callable:
    """Closure ``(X1, X2) -> (JL, JM, JN)`` in original coordinates.

    Uses the analytic closure when present, otherwise a quintic spline of the samples.
    """
    if ff.closure is not None:
        return ff.closure
    g = ff.grid
    splines = [RectBivariateSpline(g.x1, g.x2, c, kx=5, ky=5) for c in (ff.L, ff.M, ff.N)]

    def closure(X1, X2):
        out = []
        for s in splines:
            ev = lambda dx, dy: s.ev(X1, X2, dx=dx, dy=dy)
            out.append(Jet(ev(0, 0), ev(1, 0), ev(0, 1), ev(2, 0), ev(1, 1), ev(0, 2)))
        return tuple(out)

    return closure


# Codazzi solve for the gradient of g12


def _codazzi_gradient(g11, g12, g22, dg11, dg22, L, M, N, dL, dM, dN):
    """``(d1 g12, d2 g12)`` such that both Codazzi residuals vanish.

    The residuals are affine in ``(d1 g12, d2 g12)``; three evaluations give the
    affine map exactly.  Works for complex inputs (complex-step differentiation).
    """

    def resid(a, b):
        G = christoffel_from_derivatives(g11, g12, g22, dg11[0], dg11[1], a, b, dg22[0], dg22[1])
        return codazzi_from_parts(L, M, N, dL, dM, dN, G)

    zero = np.zeros_like(g11)
    one = np.ones_like(g11)
    r0 = resid(zero, zero)
    ra = resid(one, zero)
    rb = resid(zero, one)
    a11, a21 = ra[0] - r0[0], ra[1] - r0[1]
    a12, a22 = rb[0] - r0[0], rb[1] - r0[1]
    det = a11 * a22 - a12 * a21
    d1 = (-r0[0] * a22 + r0[1] * a12) / det
    d2 = (-a11 * r0[1] + a21 * r0[0]) / det
    return d1, d2


def _form_args(src, S, T, chart):
    X1, X2 = chart.to_original(S, T)
    jL, jM, jN = src(X1, X2)
    return jL, jM, jN


def _line_ode_rhs(g12, jL, jM, jN):
    """``d g12 / d x2'`` on the initial line where ``g11 = g22 = 1`` and their gradients vanish."""
    one = np.ones_like(g12)
    zero = (np.zeros_like(g12), np.zeros_like(g12))
    d1, d2 = _codazzi_gradient(
        one, g12, one, zero, zero, jL.v, jM.v, jN.v, jL.grad(), jM.grad(), jN.grad()
    )
    return 0.5 * (d1 - d2)


def _check_forms(jL, jN):
    if np.any(np.abs(jL.v) < FORM_FLOOR) or np.any(np.abs(jN.v) < FORM_FLOOR):
        raise DivisionByZeroForm("|L| or |N| below 1e-10")


def g12_initial_ode(ff: FundamentalForm, chart: RotatedChart):
    """RK4 integration of the g12 equation along ``x1' = 0``, outward from ``x2' = 0``.

    Returns ``(t, g12)``.  Where ``L`` or ``N`` changes sign the line is truncated;
    values beyond are NaN.  The grid's x2' nodes must contain 0.
    """
    src = form_source(ff)
    t = chart.grid.x2
    h = chart.grid.h2
    i0 = int(np.argmin(np.abs(t)))
    if abs(t[i0]) > 1e-12 * max(1.0, h):
        raise ValidationError("the x2' nodes must contain 0")
    g12 = np.full_like(t, np.nan)
    g12[i0] = 0.0

    def rhs(tt, y):
        tt = np.atleast_1d(tt)
        jL, jM, jN = _form_args(src, np.zeros_like(tt), tt, chart)
        _check_forms(jL, jN)
        return _line_ode_rhs(np.atleast_1d(y), jL, jM, jN)[0]

    jL0, _, jN0 = _form_args(src, np.zeros(1), np.zeros(1), chart)
    _check_forms(jL0, jN0)
    signs = (np.sign(jL0.v[0]), np.sign(jN0.v[0]))
    for direction in (1, -1):
        y = 0.0
        i = i0
        while 0 <= i + direction < len(t):
            tt = t[i]
            hh = direction * h
            try:
                k1 = rhs(tt, y)
                k2 = rhs(tt + 0.5 * hh, y + 0.5 * hh * k1)
                k3 = rhs(tt + 0.5 * hh, y + 0.5 * hh * k2)
                k4 = rhs(tt + hh, y + hh * k3)
            except DivisionByZeroForm:
                break
            jL, _, jN = _form_args(src, np.zeros(1), np.array([tt + hh]), chart)
            if (np.sign(jL.v[0]), np.sign(jN.v[0])) != signs:
                break
            y = y + hh * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            i += direction
            g12[i] = y
    return t, g12


# Reduced coefficient matrix and symbol checks


@dataclass(frozen=True)
class CoefficientMatrixA:
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray

    @property
    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21


def coefficient_matrix(L, M, N):
    """Second-order coefficient matrix of the reduced system (Gauss second-derivative terms dropped) and its determinant.

    Returns ``(A, det, closed_form)`` where ``closed_form = -(M / (2 L N)) (N + L - 2M)``.
    """
    L, M, N = (np.asarray(x, dtype=float) for x in (L, M, N))
    if np.any(np.abs(L) < FORM_FLOOR) or np.any(np.abs(N) < FORM_FLOOR):
        raise DivisionByZeroForm("|L| or |N| below 1e-10")
    A = CoefficientMatrixA(
        N / (4 * L) - M / (2 * L) - 0.25,
        -0.25 - M / (2 * N) + L / (4 * N),
        -N / (2 * L) + M / L - 0.5,
        0.5 - M / N + L / (2 * N),
    )
    closed = -0.5 * (M / (L * N)) * (N + L - 2.0 * M)
    return A, A.det, closed


def noncharacteristic_check(ff: FundamentalForm, kappa, p, tol_kappa=1e-8, tol_M=1e-8):
    """Pointwise test ``kappa > tol``, ``|M| > tol`` and ``p > 0`` (tolerances relative to sup-norms)."""
    k = kappa.values if isinstance(kappa, ScalarField) else np.asarray(kappa, dtype=float)
    pv = p.values if isinstance(p, ScalarField) else np.asarray(p, dtype=float)
    ks = max(np.max(np.abs(k)), 1e-300)
    ms = max(np.max(np.abs(ff.M)), np.max(np.abs(ff.L)), np.max(np.abs(ff.N)), 1e-300)
    return (k > tol_kappa * ks) & (np.abs(ff.M) > tol_M * ms) & (pv > 0)


def shear_symbol_matrix(u2, p, xi1, xi2):
    """Symbol of the shear-flow metric system at covector ``(xi1, xi2)``."""
    c = (u2 + p) / p
    return np.array(
        [
            [c / 4 * xi1**2 - xi2**2 / 4, -(xi1**2) / 4 + xi2**2 / (4 * c)],
            [-c / 2 * xi1**2 - xi2**2 / 2, xi1**2 / 2 + xi2**2 / (2 * c)],
        ]
    )


def shear_symbol_determinant(u2, p, xi):
    m = shear_symbol_matrix(u2, p, xi[0], xi[1])
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


# Marching


@dataclass(frozen=True)
class InitialLineData:
    """State on ``x1' = 0``: metric components and the x1'-derivatives of g11, g22."""

    t: np.ndarray
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    p11: np.ndarray
    p22: np.ndarray

    @classmethod
    def prescribed(cls, ff: FundamentalForm, chart: RotatedChart):
        """``g11 = g22 = 1`` with vanishing x1'-derivatives and g12 from the line ODE."""
        t, g12 = g12_initial_ode(ff, chart)
        one = np.ones_like(t)
        return cls(t, one, g12, one.copy(), np.zeros_like(t), np.zeros_like(t))


@dataclass
class MarchReport:
    """Result of :func:`march_metric`; ``mask`` marks trusted nodes (the cone over the line)."""

    metric: MetricField
    mask: np.ndarray
    width: float
    steps: int
    line_det: np.ndarray
    truncated: bool = False
    reason: str = ""


def _line_derivs(f, h, order):
    return diff(f, 0, h, order), diff(f, 0, h, order, 2)


class _MarchOperator:
    """Right-hand side of the first-order system in x1' for one line."""

    def __init__(self, src, chart, order):
        self.src = src
        self.chart = chart
        self.order = order
        self.ht = chart.grid.h2

    def data(self, s, t):
        X1, X2 = self.chart.to_original(np.full_like(t, s), t)
        return self.src(X1, X2)

    def _F(self, g11, g12, g22, dg11, dg22, jL, jM, jN):
        return _codazzi_gradient(
            g11, g12, g22, dg11, dg22, jL.v, jM.v, jN.v, jL.grad(), jM.grad(), jN.grad()
        )

    def __call__(self, s, t, state, want_matrix=False):
        g11, g12, g22, p11, p22 = state
        h, o = self.ht, self.order
        g11_t, g11_tt = _line_derivs(g11, h, o)
        g22_t, g22_tt = _line_derivs(g22, h, o)
        p11_t = diff(p11, 0, h, o)
        p22_t = diff(p22, 0, h, o)
        dg11 = (p11 + g11_t, p11 - g11_t)
        dg22 = (p22 + g22_t, p22 - g22_t)
        jL, jM, jN = self.data(s, t)
        F1, F2 = self._F(g11, g12, g22, dg11, dg22, jL, jM, jN)
        g12_s = 0.5 * (F1 + F2)
        F1_t = diff(F1, 0, h, o)
        F2_t = diff(F2, 0, h, o)
        kappa = jL.v * jN.v - jM.v**2

        def data_s(j):
            # x1'-derivatives of value and gradient of a data jet
            return Jet(
                j.v + 1j * _CSTEP * 0.5 * (j.d1 + j.d2),
                j.d1 + 1j * _CSTEP * 0.5 * (j.d11 + j.d12),
                j.d2 + 1j * _CSTEP * 0.5 * (j.d12 + j.d22),
                j.d11,
                j.d12,
                j.d22,
            )

        cL, cM, cN = data_s(jL), data_s(jM), data_s(jN)

        def residual(S11, S22):
            # x1'-derivatives of the Codazzi arguments, by complex step
            e = 1j * _CSTEP
            a11 = g11 + e * p11
            a12 = g12 + e * g12_s
            a22 = g22 + e * p22
            ad11 = (dg11[0] + e * (S11 + p11_t), dg11[1] + e * (S11 - p11_t))
            ad22 = (dg22[0] + e * (S22 + p22_t), dg22[1] + e * (S22 - p22_t))
            c1, c2 = self._F(a11, a12, a22, ad11, ad22, cL, cM, cN)
            F1_s, F2_s = np.imag(c1) / _CSTEP, np.imag(c2) / _CSTEP
            d2F1 = F1_s - F1_t
            d1F2 = F2_s + F2_t
            j11 = Jet(
                g11, dg11[0], dg11[1], S11 + 2 * p11_t + g11_tt, S11 - g11_tt, S11 - 2 * p11_t + g11_tt
            )
            j22 = Jet(
                g22, dg22[0], dg22[1], S22 + 2 * p22_t + g22_tt, S22 - g22_tt, S22 - 2 * p22_t + g22_tt
            )
            z = np.zeros_like(g12)
            j12 = Jet(g12, F1, F2, z, 0.5 * (d2F1 + d1F2), z)
            e1 = brioschi_from_jets(j11, j12, j22) - kappa
            e2 = d2F1 - d1F2
            return e1, e2

        zero = np.zeros_like(g11)
        one = np.ones_like(g11)
        r0 = residual(zero, zero)
        ra = residual(one, zero)
        rb = residual(zero, one)
        A11, A21 = ra[0] - r0[0], ra[1] - r0[1]
        A12, A22 = rb[0] - r0[0], rb[1] - r0[1]
        det = A11 * A22 - A12 * A21
        S11 = (-r0[0] * A22 + r0[1] * A12) / det
        S22 = (-A11 * r0[1] + A21 * r0[0]) / det
        rhs = (p11, g12_s, p22, S11, S22)
        if want_matrix:
            return rhs, (A11, A12, A21, A22)
        return rhs


def assembled_coefficient_matrix(ff_closure, chart: RotatedChart, state=None, order=4):
    """Coefficient of ``d^2/dx1'^2 (g11, g22)`` in the assembled system on ``x1' = 0``."""
    t = chart.grid.x2
    if state is None:
        one = np.ones_like(t)
        z = np.zeros_like(t)
        state = (one, z, one.copy(), z.copy(), z.copy())
    op = _MarchOperator(ff_closure, chart, order)
    _, A = op(0.0, t, state, want_matrix=True)
    return A


def _high_order_filter(f, strength):
    """Tenth-order dissipative filter along the line; ends are left untouched.

    Transfer function ``1 - strength * sin(theta / 2)^10``.
    """
    w = np.array([1, -10, 45, -120, 210, -252, 210, -120, 45, -10, 1], dtype=float) / 1024.0
    out = np.array(f, copy=True)
    n = len(f)
    if n < 11:
        return out
    acc = np.zeros(n - 10)
    for k, wk in enumerate(w):
        acc += wk * f[k : n - 10 + k]
    # (-1)^5 sin^10 sign: the stencil above equals (-1)^5 * 2^-10 * delta^10
    out[5 : n - 5] = f[5 : n - 5] + strength * acc
    return out


def march_metric(
    line: InitialLineData,
    ff: FundamentalForm,
    chart: RotatedChart,
    steps: Optional[int] = None,
    order: int = 4,
    filter: str = "high-order",
    filter_strength: float = 1.0,
    det_tol: float = 1e-8,
    spd_floor: float = 1e-8,
) -> MarchReport:
    """March the metric from ``x1' = 0`` across the strip of ``chart``.

    The step ratio ``h_{x1'} / h_{x2'}`` must not exceed 0.25.  Each step is an
    explicit midpoint (second-order Runge-Kutta) step followed by a filter of the
    line profile.  ``filter`` is ``"high-order"`` (tenth-order dissipation, the
    default), ``"gaussian"`` (width 2 nodes) or ``"none"``.  The marched system is
    of elliptic type along the line, so short-wave errors grow like
    ``exp(|k| width)``; keep the strip narrow (a few dozen line spacings).
    """
    grid = chart.grid
    if grid.h1 / grid.h2 > 0.25 + 1e-12:
        raise ValidationError("step ratio h_x1'/h_x2' must be <= 0.25")
    if len(line.t) != grid.ny:
        raise GridMismatch("initial line does not match the chart")
    steps = grid.nx - 1 if steps is None else min(steps, grid.nx - 1)
    src = form_source(ff)
    op = _MarchOperator(src, chart, order)
    state = tuple(np.asarray(a, dtype=float).copy() for a in (line.g11, line.g12, line.g22, line.p11, line.p22))
    valid = np.all(np.isfinite(np.stack(state)), axis=0)
    lo, hi = np.flatnonzero(valid)[[0, -1]]
    t_all = grid.x2

    _, A = op(0.0, t_all[lo : hi + 1], tuple(c[lo : hi + 1] for c in state), want_matrix=True)
    line_det = A[0] * A[3] - A[1] * A[2]
    if np.any(np.abs(line_det) < det_tol):
        raise DegenerateSymbol("initial line is characteristic for the assembled system")

    out = np.full((5, grid.nx, grid.ny), np.nan)
    for c in range(5):
        out[c, 0, lo : hi + 1] = state[c][lo : hi + 1]
    hs = grid.h1
    reason = ""
    k_done = 0
    for k in range(steps):
        sl = slice(lo, hi + 1)
        t = t_all[sl]
        y = tuple(c[sl] for c in state)
        if len(t) < 2 * order + 3:
            reason = "line exhausted"
            break
        s = k * hs
        k1 = op(s, t, y)
        mid = tuple(a + 0.5 * hs * b for a, b in zip(y, k1))
        k2 = op(s + 0.5 * hs, t, mid)
        new = [a + hs * b for a, b in zip(y, k2)]
        if filter == "gaussian":
            new = [gaussian_filter1d(c, 2.0, mode="nearest") for c in new]
        elif filter == "high-order":
            new = [_high_order_filter(c, filter_strength) for c in new]
        elif filter != "none":
            raise ValidationError("unknown filter")
        g11, g12, g22 = new[0], new[1], new[2]
        if not np.all(np.isfinite(np.stack(new))) or np.any(g11 <= spd_floor) or np.any(
            g11 * g22 - g12**2 <= spd_floor
        ):
            reason = "lost positive definiteness"
            break
        full = [np.full(grid.ny, np.nan) for _ in range(5)]
        for c in range(5):
            full[c][sl] = new[c]
        state = tuple(full)
        for c in range(5):
            out[c, k + 1] = state[c]
        k_done = k + 1
    width = k_done * hs
    sub = Grid2D(max(k_done + 1, 5), grid.ny, grid.h1, grid.h2, grid.origin)
    g = out[:3, : sub.nx]
    S, T = sub.mesh()
    t_lo, t_hi = t_all[lo], t_all[hi]
    # strip truncation: keep the unit-slope cone over the initial line
    cone = (T - t_lo >= S - 1e-12) & (t_hi - T >= S - 1e-12)
    finite = np.all(np.isfinite(g), axis=0)
    mask = finite & cone
    # nodes never reached are filled with the identity; all untrusted nodes are masked
    metric = MetricField(
        sub, np.where(finite, g[0], 1.0), np.where(finite, g[1], 0.0), np.where(finite, g[2], 1.0)
    )
    report = MarchReport(metric, mask, width, k_done, line_det, truncated=bool(reason), reason=reason)
    if reason == "lost positive definiteness":
        raise LostSPD(f"metric lost positive definiteness at x1' = {width:.4g}", width, report)
    return report


# Constraint residuals


def constraint_residuals(ff: FundamentalForm, g: SymmetricField, chart: Optional[RotatedChart] = None, order: int = 2, sign_u: float = 1.0):
    """Residuals of the five constraints satisfied by forms coming from a fluid.

    1. ``d1 U + d2 V`` with ``(U, V)`` the velocities recovered from the forms.
    2. divergence of the geometric-flow right-hand side.
    3, 4. the Codazzi equations.
    5. the Gauss equation ``LN - M^2 - kappa(g)``.

    With ``chart`` the fields live on a rotated chart and derivatives are converted
    to original coordinates.  ``sign_u`` fixes the sign of ``U``; the sign of ``V``
    follows from ``sign(U V) = -sign(M)``.
    """
    if ff.grid != g.grid:
        raise GridMismatch("forms and metric live on different grids")
    grid = g.grid
    conv = (lambda j: RotatedChart.jet_to_original(j)) if chart is not None else (lambda j: j)

    def jets_of(arrs):
        return tuple(conv(stencil_jet(a, grid, order)) for a in arrs)

    if ff.closure is not None and chart is None:
        jL, jM, jN = ff.closure(*grid.mesh())
    elif ff.closure is not None:
        jL, jM, jN = ff.closure(*chart.original_mesh())
    else:
        jL, jM, jN = jets_of((ff.L, ff.M, ff.N))
    if g.closure is not None and chart is None:
        j11, j12, j22 = g.closure(*grid.mesh())
    else:
        j11, j12, j22 = jets_of((g.g11, g.g12, g.g22))

    su, sv = fluid_from_lmn(ff)
    U = np.sign(sign_u) * su.values
    V = np.where(ff.M > 0, -1.0, 1.0) * np.sign(sign_u) * sv.values
    jU, jV = jets_of((U, V))
    r1 = jU.d1 + jV.d2

    G = christoffel_from_derivatives(
        j11.v, j12.v, j22.v, j11.d1, j11.d2, j12.d1, j12.d2, j22.d1, j22.d2
    )
    ru, rv = geometric_flow_from_parts(jL.v, jM.v, jN.v, G)
    jru, jrv = jets_of((ru, rv))
    r2 = jru.d1 + jrv.d2
    r3, r4 = codazzi_from_parts(jL.v, jM.v, jN.v, jL.grad(), jM.grad(), jN.grad(), G)
    kappa = brioschi_from_jets(j11, j12, j22)
    r5 = jL.v * jN.v - jM.v**2 - kappa
    return tuple(ScalarField(grid, r) for r in (r1, r2, r3, r4, r5))
