"""Shared fixtures with closed-form oracles."""
import numpy as np
import sympy as sp

from fluidgeom import constraint as C
from fluidgeom import fluid as F
from fluidgeom.geometry import FundamentalForm
from fluidgeom.grid import Grid2D, Jet

x, y = sp.symbols("x y")
TG_BASE = (np.pi / 4, np.pi / 4)
STRIP_WIDTH = 0.07


def sym_jet(expr):
    parts = [expr, sp.diff(expr, x), sp.diff(expr, y), sp.diff(expr, x, 2), sp.diff(expr, x, y), sp.diff(expr, y, 2)]
    fs = [sp.lambdify((x, y), p, "numpy") for p in parts]
    return lambda X, Y: Jet(*[np.broadcast_to(f(X, Y), np.shape(X)).astype(float) for f in fs])


class GraphSurface:
    """Graph ``z = phi`` with exact metric and normalized forms (sympy)."""

    def __init__(self, phi):
        px, py = sp.diff(phi, x), sp.diff(phi, y)
        W2 = 1 + px**2 + py**2
        self.form_jets = [sym_jet(e) for e in (sp.diff(phi, x, 2) / W2, sp.diff(phi, x, y) / W2, sp.diff(phi, y, 2) / W2)]
        metric = (1 + px**2, px * py, 1 + py**2)
        self.metric = [sp.lambdify((x, y), e, "numpy") for e in metric]
        # x1' = x1 + x2 derivative: (d1 + d2) / 2 in original coordinates
        self.metric_s = [sp.lambdify((x, y), (sp.diff(e, x) + sp.diff(e, y)) / 2, "numpy") for e in metric]

    def closure(self, X1, X2):
        return tuple(f(X1, X2) for f in self.form_jets)

    def forms(self):
        g = Grid2D(9, 9, 0.1, 0.1)
        one = np.ones(g.shape)
        return FundamentalForm(g, one, 0 * one, one, closure=self.closure)

    def line_data(self, chart):
        T = chart.grid.x2
        X1, X2 = chart.to_original(np.zeros_like(T), T)
        ev = lambda f: np.broadcast_to(f(X1, X2), X1.shape).astype(float)
        return C.InitialLineData(T, ev(self.metric[0]), ev(self.metric[1]), ev(self.metric[2]), ev(self.metric_s[0]), ev(self.metric_s[2]))


MMS_PHI = 0.5 * x**2 + 0.3 * x * y + 0.4 * y**2 + 0.1 * x**3
MMS_BASE = (0.1, 0.05)


def mms_errors(ns=(33, 65, 129), width=STRIP_WIDTH):
    """Max error of the marched metric on the trusted cone, per line resolution."""
    surf = GraphSurface(MMS_PHI)
    ff = surf.forms()
    errs = []
    for n in ns:
        chart = C.strip_chart(n, 0.5, width=width, base=MMS_BASE)
        rep = C.march_metric(surf.line_data(chart), ff, chart)
        XX1, XX2 = C.RotatedChart(rep.metric.grid, MMS_BASE).original_mesh()
        err = 0.0
        for f, name in zip(surf.metric, ("g11", "g12", "g22")):
            exact = np.broadcast_to(f(XX1, XX2), XX1.shape)
            err = max(err, float(np.max(np.abs(getattr(rep.metric, name) - exact)[rep.mask])))
        errs.append(err)
    return errs


def tg_forms():
    grid = Grid2D.from_extent((0, 1), (0, 1), 9, 9)
    return F.lmn_from_fluid(F.taylor_green_fixture(grid, analytic=True))


def tg_march(n, width=STRIP_WIDTH, order=2):
    """March Taylor-Green forms; residuals on the cone minus a band of fixed physical width."""
    ff = tg_forms()
    chart = C.strip_chart(n, 0.5, width=width, base=TG_BASE)
    rep = C.march_metric(C.InitialLineData.prescribed(ff, chart), ff, chart)
    g = rep.metric
    chart = C.RotatedChart(g.grid, TG_BASE)
    forms = FundamentalForm(g.grid, *(j.v for j in ff.closure(*chart.original_mesh())))
    res = C.constraint_residuals(forms, g, chart=chart, order=order)
    pad = max(2, (n - 1) // 16)
    mask = rep.mask.copy()
    mask[:pad] = mask[-pad:] = False
    mask[:, :pad] = mask[:, -pad:] = False
    return rep, chart, [float(np.max(np.abs(r.values[mask]))) for r in res]
