import numpy as np
import pytest
import sympy as sp

from fluidgeom import geometry as G
from fluidgeom.errors import DegenerateSurface, SingularMetric, ValidationError
from fluidgeom.grid import Grid2D, Jet, ScalarField

x, y = sp.symbols("x y")


def _sym_jet(expr):
    parts = [expr, sp.diff(expr, x), sp.diff(expr, y), sp.diff(expr, x, 2), sp.diff(expr, x, y), sp.diff(expr, y, 2)]
    fs = [sp.lambdify((x, y), p, "numpy") for p in parts]
    return lambda X, Y: Jet(*[np.broadcast_to(f(X, Y), np.shape(X)).astype(float) for f in fs])


def _sym_gauss_curvature(E, F, Gg):
    # independent oracle: Christoffel symbols and the Riemann tensor by sympy
    g = sp.Matrix([[E, F], [F, Gg]])
    gi = g.inv()
    X = (x, y)
    gam = [[[sum(gi[k, m] * (sp.diff(g[m, i], X[j]) + sp.diff(g[m, j], X[i]) - sp.diff(g[i, j], X[m])) for m in range(2)) / 2 for j in range(2)] for i in range(2)] for k in range(2)]
    R = 0
    for m in range(2):
        term = sp.diff(gam[m][0][0], y) - sp.diff(gam[m][0][1], x)
        for n in range(2):
            term += gam[n][0][0] * gam[m][n][1] - gam[n][0][1] * gam[m][n][0]
        R += g[1, m] * term
    return R / g.det(), gam


@pytest.fixture(scope="module")
def sym_metric():
    E = 1 + x**2 / 3 + y / 5
    F = x * y / 7
    Gg = 2 + sp.sin(y) / 4 + x**2 / 6
    kappa, gam = _sym_gauss_curvature(E, F, Gg)
    return (E, F, Gg), sp.lambdify((x, y), kappa, "numpy"), gam


def test_brioschi_matches_symbolic_oracle(sym_metric):
    (E, F, Gg), kappa, _ = sym_metric
    grid = Grid2D.from_extent((-0.5, 0.5), (-0.5, 0.5), 9, 9)
    X1, X2 = grid.mesh()
    jets = [_sym_jet(e)(X1, X2) for e in (E, F, Gg)]
    np.testing.assert_allclose(G.brioschi_from_jets(*jets), kappa(X1, X2), atol=1e-12)


def test_christoffel_matches_symbolic_oracle(sym_metric):
    (E, F, Gg), _, gam = sym_metric
    grid = Grid2D.from_extent((-0.5, 0.5), (-0.5, 0.5), 9, 9)
    X1, X2 = grid.mesh()
    clos = lambda a, b: tuple(_sym_jet(e)(a, b) for e in (E, F, Gg))
    g = G.MetricField(grid, *(j.v for j in clos(X1, X2)), closure=clos)
    ch = G.christoffel(g)
    for k in (1, 2):
        for i, j in ((1, 1), (1, 2), (2, 2)):
            want = sp.lambdify((x, y), gam[k - 1][i - 1][j - 1], "numpy")(X1, X2)
            np.testing.assert_allclose(ch(k, i, j), np.broadcast_to(want, X1.shape), atol=1e-12)


def test_riemann_equals_kappa_times_det(sym_metric):
    (E, F, Gg), kappa, _ = sym_metric
    grid = Grid2D.from_extent((-0.5, 0.5), (-0.5, 0.5), 9, 9)
    clos = lambda a, b: tuple(_sym_jet(e)(a, b) for e in (E, F, Gg))
    X1, X2 = grid.mesh()
    g = G.MetricField(grid, *(j.v for j in clos(X1, X2)), closure=clos)
    np.testing.assert_allclose(G.riemann_R1212(g).values, kappa(X1, X2) * g.det, atol=1e-12)


def test_flat_metric_has_zero_curvature():
    grid = Grid2D.from_extent((0, 1), (0, 1), 9, 9)
    g = G.MetricField(grid, 4.0, 0.0, 4.0)
    assert np.max(np.abs(G.brioschi_curvature(g).values)) < 1e-12


def test_sphere_analytic_curvature_and_forms():
    grid = Grid2D.from_extent((-0.4, 0.4), (-0.4, 0.4), 11, 11)
    R = 2.0
    y = G.sphere_chart(grid, R, analytic=True)
    g = G.induced_metric(y)
    np.testing.assert_allclose(G.brioschi_curvature(g).values, 1 / R**2, atol=1e-13)
    ff = G.second_fundamental_form(y)
    kappa = ScalarField(grid, 1 / R**2)
    assert np.max(np.abs(G.gauss_residual(ff, kappa).values)) < 1e-13


def test_graph_forms_closed_form():
    # normalized forms of z = phi: L = phi_11 / (1 + |grad phi|^2)
    grid = Grid2D.from_extent((-0.3, 0.3), (-0.3, 0.3), 9, 9)
    X1, X2 = grid.mesh()
    a, b, c = 0.7, 0.2, -0.4

    def clos(X1, X2):
        z = 0.5 * a * X1**2 + b * X1 * X2 + 0.5 * c * X2**2
        y = np.stack([X1, X2, z], -1)
        dy = np.zeros(X1.shape + (3, 2))
        dy[..., 0, 0] = dy[..., 1, 1] = 1
        dy[..., 2, 0] = a * X1 + b * X2
        dy[..., 2, 1] = b * X1 + c * X2
        d2y = np.zeros(X1.shape + (3, 2, 2))
        d2y[..., 2, 0, 0], d2y[..., 2, 0, 1], d2y[..., 2, 1, 0], d2y[..., 2, 1, 1] = a, b, b, c
        return {"y": y, "dy": dy, "d2y": d2y}

    yv = clos(X1, X2)
    ff = G.second_fundamental_form(G.Immersion(grid, yv["y"], closure=clos))
    W2 = 1 + (a * X1 + b * X2) ** 2 + (b * X1 + c * X2) ** 2
    np.testing.assert_allclose(ff.L, a / W2, atol=1e-14)
    np.testing.assert_allclose(ff.M, b / W2, atol=1e-14)
    np.testing.assert_allclose(ff.N, c / W2, atol=1e-14)
    kappa = ScalarField(grid, (a * c - b * b) / W2**2)
    assert np.max(np.abs(G.gauss_residual(ff, kappa).values)) < 1e-14


def test_codazzi_vanishes_on_sphere_forms_at_order_two():
    errs = []
    for n in (17, 33):
        grid = Grid2D.from_extent((-0.3, 0.3), (-0.3, 0.3), n, n)
        y = G.sphere_chart(grid, 1.0, analytic=True)
        g = G.induced_metric(y)
        ff = G.second_fundamental_form(y)
        r1, r2 = G.codazzi_residual(ff, G.christoffel(g))
        errs.append(max(np.abs(r1.values).max(), np.abs(r2.values).max()))
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_degenerate_inputs_raise():
    grid = Grid2D.from_extent((0, 1), (0, 1), 6, 6)
    X1, _ = grid.mesh()
    flat_line = np.stack([X1, 0 * X1, 0 * X1], -1)
    with pytest.raises(DegenerateSurface):
        G.induced_metric(G.Immersion(grid, flat_line))
    with pytest.raises(SingularMetric):
        G.MetricField(grid, 1.0, 1.0, 1.0)
    with pytest.raises(ValidationError):
        G.sphere_chart(Grid2D.from_extent((0, 2), (0, 2), 6, 6), 1.0)
