import numpy as np
import pytest
import sympy as sp

from fluidgeom import fluid as F
from fluidgeom.errors import CFLViolation, NegativeDiscriminant, NegativeRadicand, NonpositiveCurvature, NonpositiveDensity, ValidationError
from fluidgeom.geometry import FundamentalForm, gauss_residual
from fluidgeom.grid import Grid2D, ScalarField, convergence_order


def _tg_grid(n):
    return Grid2D.from_extent((0, 2 * np.pi), (0, 2 * np.pi), n, n)


def test_gauss_identity_symbolic():
    u, v, p = sp.symbols("u v p")
    L, M, N = v**2 + p, -u * v, u**2 + p
    assert sp.expand(L * N - M**2 - (p**2 + p * (u**2 + v**2))) == 0


def test_lmn_from_fluid_componentwise_and_gauss(rng, small_grid):
    u, v, p = rng.normal(size=(3,) + small_grid.shape)
    p = np.abs(p) + 0.1
    s = F.FluidState(small_grid, u, v, p)
    ff = F.lmn_from_fluid(s)
    np.testing.assert_array_equal(ff.L, v**2 + p)
    np.testing.assert_array_equal(ff.M, -u * v)
    np.testing.assert_array_equal(ff.N, u**2 + p)
    kappa = ScalarField(small_grid, p**2 + p * (u**2 + v**2))
    assert np.max(np.abs(gauss_residual(ff, kappa).values)) < 1e-12


def test_round_trip_and_sign_hint(rng, small_grid):
    u, v = rng.uniform(-2, 2, (2,) + small_grid.shape)
    s = F.FluidState(small_grid, u, v, 0.5)
    ff = F.lmn_from_fluid(s)
    su, sv = F.fluid_from_lmn(ff)
    np.testing.assert_allclose(su.values, np.abs(u), atol=1e-12)
    np.testing.assert_allclose(sv.values, np.abs(v), atol=1e-12)
    uu, vv = F.apply_sign_hint(su, sv, ff.M, sign_u=np.sign(u))
    np.testing.assert_allclose(uu, u, atol=1e-12)
    np.testing.assert_allclose(vv, v, atol=1e-12)


def test_pressure_from_curvature_is_the_positive_root(rng):
    q2 = rng.uniform(0, 5, 1000)
    p = rng.uniform(0.01, 3, 1000)
    kappa = p**2 + p * q2
    np.testing.assert_allclose(F.pressure_from_curvature(q2, kappa), p, rtol=1e-12)
    with pytest.raises(NegativeDiscriminant):
        F.pressure_from_curvature(np.array([1.0]), np.array([-1.0]))


def test_taylor_green_is_steady_euler_analytic():
    grid = _tg_grid(33)
    s = F.taylor_green_fixture(grid, analytic=True)
    zero = np.zeros(grid.shape)
    for r in F.euler_residual(s, zero, zero):
        assert np.max(np.abs(r.values)) < 1e-14
    assert np.max(np.abs(F.pressure_poisson_residual(s).values)) < 1e-13


@pytest.mark.parametrize("order", [2, 4])
def test_taylor_green_stencil_residuals_converge(order):
    errs, hs = [], []
    for n in (33, 65, 129):
        grid = _tg_grid(n)
        s = F.taylor_green_fixture(grid)
        zero = np.zeros(grid.shape)
        r1, _, _ = F.euler_residual(s, zero, zero, order)
        errs.append(np.max(np.abs(r1.values)))
        hs.append(grid.h1)
    assert abs(convergence_order(errs, hs) - order) < 0.3


def test_taylor_green_requires_positive_pressure():
    with pytest.raises(ValidationError):
        F.taylor_green_fixture(_tg_grid(9), p_shift=0.4)
    s = F.taylor_green_fixture(_tg_grid(33), p_shift=0.51)
    assert s.p.min() > 0


def test_geometric_flow_is_linear_in_forms(rng):
    G = rng.normal(size=(6, 4))
    L, M, N = rng.normal(size=(3, 4))
    ru, rv = F.geometric_flow_from_parts(L, M, N, G)
    g1_11, g1_12, g1_22, g2_11, g2_12, g2_22 = G
    np.testing.assert_allclose(ru, g1_22 * L - 2 * g1_12 * M + g1_11 * N)
    np.testing.assert_allclose(rv, g2_22 * L - 2 * g2_12 * M + g2_11 * N)


@pytest.mark.parametrize("gamma", [1.0, 1.4, 2.0])
def test_compressible_density_inversion(rng, gamma):
    rho = rng.uniform(0.2, 3, 500)
    q2 = rng.uniform(0, 4, 500)
    kappa = F.compressible_gauss_relation(rho, q2, gamma)
    np.testing.assert_allclose(F.rho_from_kappa(kappa, q2, gamma), rho, rtol=1e-10)
    with pytest.raises(NonpositiveCurvature):
        F.rho_from_kappa(np.array([0.0]), np.array([1.0]), gamma)


def test_compressible_forms_gauss_and_round_trip(rng, small_grid):
    rho = rng.uniform(0.5, 2, small_grid.shape)
    u, v = rng.uniform(-1, 1, (2,) + small_grid.shape)
    s = F.CompressibleState(small_grid, rho, u, v, gamma=1.4)
    ff = F.lmn_from_compressible(s)
    np.testing.assert_allclose(ff.L * ff.N - ff.M**2, F.compressible_gauss_relation(rho, u * u + v * v, 1.4), rtol=1e-12)
    su, sv = F.compressible_from_lmn(ff, rho)
    np.testing.assert_allclose(su.values, np.abs(u), atol=1e-12)
    np.testing.assert_allclose(sv.values, np.abs(v), atol=1e-12)
    with pytest.raises(NonpositiveDensity):
        F.CompressibleState(small_grid, -rho, u, v)


def _transport_error(n, scheme):
    h = 2 * np.pi / n
    grid = Grid2D(n, n, h, h)
    X1, X2 = grid.mesh()
    c = (1.0, 0.5)
    rho = lambda t: 1 + 0.3 * np.sin(X1 - c[0] * t) * np.sin(X2 - c[1] * t)
    s = F.CompressibleState(grid, rho(0), np.full(grid.shape, c[0]), np.full(grid.shape, c[1]))
    kappa = ScalarField(grid, (1 + s.q2) * rho(0) ** 2)
    dt, t = 0.4 * h, 0.0
    steps = int(round(1.0 / dt))
    for _ in range(steps):
        kappa = F.kappa_transport_step(kappa, s, dt, scheme=scheme)
        t += dt
    # L1 norm: the limiter clips smooth extrema, which caps the max-norm order near 1.4
    return np.mean(np.abs(np.sqrt(kappa.values / (1 + s.q2)) - rho(t))), h


@pytest.mark.parametrize("scheme,nominal,tol", [("upwind", 1.0, 0.2), ("muscl", 2.0, 0.2)])
def test_transport_convergence(scheme, nominal, tol):
    errs, hs = zip(*(_transport_error(n, scheme) for n in (32, 64, 128)))
    assert abs(convergence_order(errs, hs) - nominal) < tol


def test_transport_conserves_mass_and_checks_cfl():
    n = 32
    h = 2 * np.pi / n
    X1, X2 = np.meshgrid(np.arange(n) * h, np.arange(n) * h, indexing="ij")
    w = 1 + 0.5 * np.sin(X1) * np.cos(X2)
    u = 0.8 + 0.1 * np.cos(X2)
    v = 0.3 * np.sin(X1)
    w1 = F.transport_w_step(w, u, v, 0.4 * h, h, h)
    assert abs(w1.sum() - w.sum()) < 1e-11 * w.sum()
    with pytest.raises(CFLViolation):
        F.transport_w_step(w, u, v, 2 * h, h, h)


def test_gromov_identification(rng):
    U1, U2 = rng.uniform(0, 2, (2, 1000))
    P = rng.uniform(-1, 1, 1000)
    t = F.GromovTriple(U1**2 + P, U1 * U2, U2**2 + P)
    a, b, p = F.gromov_identification(t)
    np.testing.assert_allclose(a * a + p, t.r1, atol=1e-12)
    np.testing.assert_allclose(b * b + p, t.r3, atol=1e-12)
    np.testing.assert_allclose(a * b, np.abs(t.r2), atol=1e-12)
