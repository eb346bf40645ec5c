import numpy as np
import pytest

from fluidgeom import elasto as E
from fluidgeom import fluid as F
from fluidgeom.errors import NonpositiveDensity, ValidationError
from fluidgeom.fluid import StressField
from fluidgeom.geometry import FundamentalForm, MetricField, christoffel
from fluidgeom.grid import Grid2D, ScalarField

GRID = Grid2D.from_extent((-1, 1), (-1, 1), 21, 21)
PAIRS = [(1, 1), (-1, 1), (-1, -1), (1, -1)]


def test_stress_forms_reduce_to_fluid_map(rng):
    u, v = rng.normal(size=(2,) + GRID.shape)
    p = rng.uniform(0.1, 2, GRID.shape)
    hydro = StressField(GRID, -p, 0.0, -p)
    ff = E.lmn_from_stress(1.0, u, v, hydro)
    ref = F.lmn_from_fluid(F.FluidState(GRID, u, v, p))
    for a, b in ((ff.L, ref.L), (ff.M, ref.M), (ff.N, ref.N)):
        np.testing.assert_array_equal(a, b)
    zero = E.lmn_from_stress(1.0, u, v, StressField(GRID, 0.0, 0.0, 0.0))
    np.testing.assert_allclose(zero.L, v * v)
    np.testing.assert_allclose(zero.M, -u * v)


def test_positivity_equals_gauss_product(rng):
    rho = rng.uniform(0.5, 2, GRID.shape)
    u, v, a, b, c = rng.normal(size=(5,) + GRID.shape)
    T = StressField(GRID, a, b, c)
    ff = E.lmn_from_stress(rho, u, v, T)
    np.testing.assert_allclose(E.positivity_condition(rho, u, v, T).values, ff.L * ff.N - ff.M**2, atol=1e-12)
    p = rng.uniform(0.1, 2, GRID.shape)
    pos = E.positivity_condition(rho, u, v, StressField(GRID, -p, 0.0, -p)).values
    np.testing.assert_allclose(pos, p * p + p * rho * (u * u + v * v), rtol=1e-12)
    assert np.all(E.positivity_condition(0.0, 0.0, 0.0, StressField(GRID, 0.0, 0.0, 0.0)).values == 0)


def test_neo_hookean_stress():
    ds = E.DeformationState(GRID, np.eye(2), rho0=1.0)
    T = E.neo_hookean_stress(ds)
    assert np.all(T.T11 == 1) and np.all(T.T12 == 0) and np.all(T.T22 == 1)
    s = 0.3
    ds = E.DeformationState(GRID, np.array([[1.0, s], [0.0, 1.0]]), rho0=2.0)
    T = E.neo_hookean_stress(ds)
    np.testing.assert_allclose(np.stack([T.T11, T.T12, T.T22], -1), np.broadcast_to([2 * (1 + s * s), 2 * s, 2.0], GRID.shape + (3,)))
    ds = E.DeformationState(GRID, 2 * np.eye(2), rho0=1.0)
    np.testing.assert_allclose(ds.rho, 0.25)
    np.testing.assert_allclose(E.neo_hookean_stress(ds).T11, 1.0)
    with pytest.raises(ValidationError):
        E.DeformationState(GRID, np.diag([1.0, -1.0]))


@pytest.mark.parametrize("pair", PAIRS)
def test_traveling_wave_kinematics(pair):
    m = E.traveling_wave_motion(E.sine_profile(), pair)
    X1, X2 = GRID.mesh()
    t = 0.37
    F_ = m.F(X1, X2, t)
    np.testing.assert_allclose(F_[..., 0, 1], np.cos(X2 + pair[0] * t))
    np.testing.assert_array_equal(np.linalg.det(F_), 1.0)
    # closures against central differences of the position
    h = 1e-6
    dt = (m.position(X1, X2, t + h) - m.position(X1, X2, t - h)) / (2 * h)
    np.testing.assert_allclose(m.velocity(X1, X2, t), dt, atol=1e-8)


@pytest.mark.parametrize("pair", PAIRS)
def test_wave_equation_holds(pair):
    m = E.traveling_wave_motion(E.band_profile(0.5, 0.2), pair)
    for r in E.wave_equation_residual(m, GRID, 0.4):
        assert np.max(np.abs(r.values)) < 1e-10
    plain = E.Motion(m.position, m.gradient, m.velocity)
    for r in E.wave_equation_residual(plain, GRID, 0.4, h=1e-3):
        assert np.max(np.abs(r.values)) < 1e-3


def test_es2_and_caveat_classification():
    w = E.sine_profile()
    for pair, caveat_ok in zip(PAIRS, (True, False, True, False)):
        r1, r2, r3, cav = E.es2_residual(E.traveling_wave_motion(w, pair), GRID, 0.3)
        assert max(np.abs(r.values).max() for r in (r1, r2, r3)) < 1e-14
        assert (np.abs(cav.values).max() < 1e-14) == caveat_ok
    zero = E.traveling_wave_motion(E.ZERO_PROFILE, (1, -1))
    assert max(np.abs(r.values).max() for r in E.es2_residual(zero, GRID, 0.3)) == 0


def test_es2_scale_invariance():
    m = E.traveling_wave_motion(E.sine_profile(), (1, 1))
    lam = 2.5
    ms = E.rescaled_motion(m, lam)
    small = Grid2D.from_extent((-0.4, 0.4), (-0.4, 0.4), 9, 9)
    big = Grid2D.from_extent((-0.4 * lam, 0.4 * lam), (-0.4 * lam, 0.4 * lam), 9, 9)
    a = E.es2_residual(m, small, 0.2)
    b = E.es2_residual(ms, big, 0.2 * lam)
    for ra, rb in zip(a, b):
        np.testing.assert_allclose(ra.values, rb.values, atol=1e-14)


def test_steadiness_traces():
    w = E.sine_profile()
    times = np.linspace(0, 2, 21)
    x0 = (0.3, 0.7)
    st = E.current_config_steadiness(E.traveling_wave_motion(w, (1, 1)), x0, times)
    assert st.is_steady
    np.testing.assert_allclose(st.velocity[:, 0], np.cos(0.7))
    un = E.current_config_steadiness(E.traveling_wave_motion(w, (-1, 1)), x0, times)
    assert not un.is_steady
    np.testing.assert_allclose(un.velocity[:, 0], -np.cos(0.7 - 2 * times), atol=1e-14)
    st3 = E.current_config_steadiness(E.traveling_wave_motion(w, (-1, -1)), x0, times)
    assert st3.is_steady
    np.testing.assert_allclose(st3.velocity[:, 1], -1.0)
    assert E.current_config_steadiness(E.traveling_wave_motion(E.ZERO_PROFILE, (-1, 1)), x0, times).is_steady
    with pytest.raises(ValidationError):
        E.current_config_steadiness(E.Motion(None, None, None), x0, times)


def test_degenerate_fields():
    one = ScalarField(GRID, 1.0)
    s = E.degenerate_continuum_fields(one, one, 1.0, -0.5, np.linspace(0, 3, 7))
    np.testing.assert_allclose(s.u[:, 0, 0], 1 / (1 + s.times), atol=1e-9)
    assert s.momentum_drift() < 1e-9
    s0 = E.degenerate_continuum_fields(ScalarField(GRID, 0.0), one, 0.4, 0.2, [0.0, 1.0])
    assert np.all(s0.u == 0.4) and np.all(s0.rho == 1.0)
    with pytest.raises(NonpositiveDensity) as info:
        E.degenerate_continuum_fields(ScalarField(GRID, -0.5), one, 1.0, 0.0, [0.0, 1.0, 3.0])
    assert info.value.time == pytest.approx(2.0)


def _manufactured_surface():
    # Gamma^1_11 = 1 and N = cos t give dt m_u = cos t; the v equation has no source
    g = GRID
    z = np.zeros(g.shape)

    class Gam:
        grid = g

        @staticmethod
        def components():
            return (z + 1.0, z, z, z, z, z)

    return lambda t: (Gam, FundamentalForm(g, 0.0, 0.0, np.cos(t)))


def test_mechanics_from_manifold_manufactured():
    X1, X2 = GRID.mesh()
    rho0 = 1.0 + 0.1 * X1
    u0 = 0.5 + 0 * X1
    s = E.mechanics_from_manifold(_manufactured_surface(), rho0, u0, 0.2, [0.0, 0.5, 1.0])
    mu = s.rho * s.u
    np.testing.assert_allclose(mu[-1], rho0 * u0 + np.sin(1.0), atol=1e-8)
    assert s.gap < 1e-10


def test_mechanics_gap_shrinks_at_rk4_rate():
    X1, X2 = GRID.mesh()
    gaps = []
    for dt in (0.1, 0.05):
        s = E.mechanics_from_manifold(_manufactured_surface(), 1.0 + 0.2 * np.sin(X1) * np.cos(X2), 0.5 + 0.3 * X2, 0.1 * X1, [1.0], max_step=dt)
        gaps.append(s.gap)
    assert gaps[1] < gaps[0] / 12 or gaps[1] < 1e-13


def test_mechanics_flat_surface_keeps_fields_constant():
    from fluidgeom import developable as D

    grid = Grid2D.from_extent((-0.2, 0.2), (-0.2, 0.2), 9, 9)
    sp = D.ShearProfile(lambda x: 0.5 + 0 * x, A=2.0)
    gs = D.gstar_metric(sp, grid)
    ff = FundamentalForm(grid, 0.0, 0.0, 0.25)
    g_exact = MetricField(grid, gs.g11, gs.g12, gs.g22)
    s = E.mechanics_from_manifold(E.static_surface(christoffel(g_exact, 4), ff), 1.0, 0.3, 0.1, [0.0, 1.0])
    c = (grid.nx // 2, grid.ny // 2)
    assert abs(s.u[-1][c] - 0.3) < 1e-6 and abs(s.rho[-1][c] - 1.0) < 1e-6


def test_constrained_residuals_fluid_reduction():
    grid = Grid2D.from_extent((0, 2 * np.pi), (0, 2 * np.pi), 33, 33)
    s = F.taylor_green_fixture(grid)
    ff = F.lmn_from_fluid(s)
    g = MetricField(grid, 1.0, 0.0, 1.0)
    hydro = lambda Lv, rho, F_, g_: (-s.p, 0 * s.p, -s.p)
    res = E.constrained_system_residual(grid, 1.0, s.u, s.v, np.eye(2), g, ff, stress_rule=hydro)
    zero = np.zeros(grid.shape)
    e1, e2, _ = F.euler_residual(s, zero, zero)
    np.testing.assert_allclose(res["momentum_1"].values, e1.values, atol=1e-12)
    np.testing.assert_allclose(res["momentum_2"].values, e2.values, atol=1e-12)
    for k in ("identification_11", "identification_12", "identification_22"):
        assert np.abs(res[k].values).max() < 1e-14
    kappa = ff.L * ff.N - ff.M**2
    np.testing.assert_allclose(res["gauss"].values, kappa, atol=1e-12)


def test_constrained_residuals_smoke(rng):
    grid = Grid2D.from_extent((0, 1), (0, 1), 9, 9)
    rho = rng.uniform(0.5, 1.5, grid.shape)
    u, v = rng.normal(size=(2,) + grid.shape)
    F_ = np.eye(2) + 0.1 * rng.normal(size=grid.shape + (2, 2))
    g = MetricField(grid, 1 + 0.1 * rng.random(grid.shape), 0.0, 1.0)
    ff = FundamentalForm(grid, *rng.normal(size=(3,) + grid.shape))
    res = E.constrained_system_residual(grid, rho, u, v, F_, g, ff, rates=E.Rates(rho=0.1))
    assert len(res) == 13
    assert all(np.all(np.isfinite(r.values)) for r in res.values())
