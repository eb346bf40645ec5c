"""Acceptance criteria; each test records one pass/fail line for the terminal summary."""
import json
import time

import numpy as np
import pytest
from scipy.special import j0

from conftest import record
from fluidgeom import cli
from fluidgeom import constraint as C
from fluidgeom import developable as D
from fluidgeom import elasto as E
from fluidgeom import fluid as F
from fluidgeom import geometry as G
from fluidgeom.geometry import Immersion, MetricField
from fluidgeom.grid import Grid2D, ScalarField, convergence_order
from fluidgeom.nash_kuiper import StageParams, build_corrugation_profile, run_embedding, time_switch_sequence
from helpers import mms_errors, tg_march


def test_criterion_01_duality_algebra():
    rng = np.random.default_rng(1)
    grid = Grid2D(100, 100, 0.01, 0.01)
    t0 = time.perf_counter()
    u, v = rng.uniform(-3, 3, (2,) + grid.shape)
    p = rng.uniform(0.01, 3, grid.shape)
    ff = F.lmn_from_fluid(F.FluidState(grid, u, v, p))
    su, sv = F.fluid_from_lmn(ff)
    gauss = G.gauss_residual(ff, ScalarField(grid, p * p + p * (u * u + v * v)))
    elapsed = time.perf_counter() - t0
    trip = max(np.max(np.abs(su.values - np.abs(u))), np.max(np.abs(sv.values - np.abs(v))))
    gres = np.max(np.abs(gauss.values))
    ok = trip < 1e-12 and gres < 1e-12 and elapsed < 1.0
    record(1, ok, f"round trip {trip:.1e}, gauss {gres:.1e}, {elapsed:.3f} s")
    assert ok


def _sphere_errors(order):
    errs, hs = [], []
    for n in (33, 65, 129):
        grid = Grid2D.from_extent((-0.3, 0.3), (-0.3, 0.3), n, n)
        g = MetricField(grid, *(j.v for j in G.sphere_metric_closure(1.0)(*grid.mesh())))
        f = G.second_fundamental_form(G.sphere_chart(grid, 1.0, analytic=True))
        ff = G.FundamentalForm(grid, f.L, f.M, f.N)
        kappa = G.brioschi_curvature(g, order)
        c1, c2 = G.codazzi_residual(ff, G.christoffel(g, order), order)
        gr = G.gauss_residual(ff, kappa)
        errs.append([np.max(np.abs(a)) for a in (kappa.values - 1.0, gr.values, c1.values, c2.values)])
        hs.append(grid.h1)
    errs = np.array(errs)
    return [convergence_order(errs[:, k], hs) for k in range(errs.shape[1])]


def test_criterion_02_sphere_convergence():
    got = {order: _sphere_errors(order) for order in (2, 4)}
    ok = all(abs(o - order) <= 0.3 for order, os in got.items() for o in os)
    detail = "; ".join(f"order {k}: " + " ".join(f"{o:.2f}" for o in v) for k, v in got.items())
    record(2, ok, detail)
    assert ok


def test_criterion_03_shear_surface():
    grid = Grid2D.from_extent((-0.5, 0.5), (-0.5, 0.5), 33, 33)
    X1, X2 = grid.mesh()
    sp = D.ShearProfile(lambda x: 0.3 + 0.4 * np.sin(3 * x), A=2.0, du=lambda x: 1.2 * np.cos(3 * x))
    y = D.shear_surface(sp, grid, analytic=True)
    ff = G.second_fundamental_form(y)
    g = G.induced_metric(y)
    lm = max(np.max(np.abs(ff.L)), np.max(np.abs(ff.M)))
    nres = np.max(np.abs(ff.N - sp.velocity(X2) ** 2))
    kap = np.max(np.abs(G.brioschi_curvature(g).values))
    gs = D.gstar_metric(sp, grid)
    fp = D.integrate_profile(sp, X2).fp
    # closed form of the metric of (A x2, A x1, f(x2))
    gap = max(np.max(np.abs(g.g11 - 4.0)), np.max(np.abs(g.g12)), np.max(np.abs(g.g22 - 4.0 - fp**2)))
    gap = max(gap, np.max(np.abs(gs.g22 - 4.0 - fp**2)), np.max(np.abs(gs.g11 - 4.0)))
    c, A = 0.7, 2.0
    x = np.linspace(-0.5, 0.5, 41)
    const = D.ShearProfile(lambda s: np.full_like(s, c), A=A)
    tan_gap = np.max(np.abs(D.integrate_profile(const, x).fp + A * np.tan(A * c * c * x)))
    ok = lm == 0.0 and nres < 1e-8 and kap < 1e-8 and gap < 1e-13 and tan_gap < 1e-8
    record(3, ok, f"L,M {lm:.0e}, N-u^2 {nres:.1e}, kappa {kap:.1e}, g* {gap:.1e}, tan vs RK4 {tan_gap:.1e}")
    assert ok


def test_criterion_04_degeneracy():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(1000):
        worst = max(worst, abs(C.shear_symbol_determinant(rng.uniform(0, 4), rng.uniform(0.1, 4), rng.normal(size=2))))
    L, N = rng.uniform(0.5, 2, (2, 10000)) * rng.choice([-1, 1], (2, 10000))
    M = rng.uniform(-2, 2, 10000)
    A, _, _ = C.coefficient_matrix(L, M, N)
    stacked = np.moveaxis(np.array([[A.a11, A.a12], [A.a21, A.a22]]), -1, 0)
    oracle = -0.5 * (M / (L * N)) * (N + L - 2 * M)
    gap = np.max(np.abs(np.linalg.det(stacked) - oracle))
    ok = worst < 1e-12 and gap < 1e-12
    record(4, ok, f"symbol det {worst:.1e}, coefficient det gap {gap:.1e}")
    assert ok


def test_criterion_05_marching():
    t0 = time.perf_counter()
    mms = mms_errors((33, 65, 129))
    mms_order = min(np.log2(np.array(mms[:-1]) / np.array(mms[1:])))
    res = []
    for n in (33, 65, 129):
        rep, chart, r = tg_march(n)
        res.append(r)
    res = np.array(res)
    tg_order = min(np.log2(res[:-1, 1:] / res[1:, 1:]).ravel())
    gstar = D.gstar_metric(D.ShearProfile(lambda x: np.zeros_like(x), A=2.0), rep.metric.grid, points=chart.original_mesh())
    margin = D.shortness_margin(rep.metric, gstar).values[rep.mask].min()
    elapsed = time.perf_counter() - t0
    ok = mms_order >= 2.0 - 0.1 and tg_order >= 2.0 - 0.1 and res[:, 0].max() < 1e-10 and margin > 0 and elapsed < 30
    record(
        5,
        ok,
        f"MMS order {mms_order:.2f}, Taylor-Green order {tg_order:.2f}, "
        f"velocity divergence {res[:, 0].max():.1e}, margin {margin:.2f}, {elapsed:.1f} s",
    )
    assert ok


TRANSPORT_C = 0.2


def test_criterion_06_kappa_transport():
    n = 129
    h = 2 * np.pi / n
    grid = Grid2D(n, n, h, h)
    X1, X2 = grid.mesh()
    c = (1.0, 0.5)
    rho = lambda t: 1 + 0.3 * np.sin(X1 - c[0] * t) * np.sin(X2 - c[1] * t)
    s = F.CompressibleState(grid, rho(0), np.full(grid.shape, c[0]), np.full(grid.shape, c[1]))
    kappa = ScalarField(grid, (1 + s.q2) * rho(0) ** 2)
    dt, t = 0.4 * h, 0.0
    worst, kmin = 0.0, np.inf
    for _ in range(100):
        kappa = F.kappa_transport_step(kappa, s, dt)
        t += dt
        worst = max(worst, np.max(np.abs(np.sqrt(kappa.values / (1 + s.q2)) - rho(t))))
        kmin = min(kmin, kappa.values.min())
    ratio = worst / (h * h + dt)
    ok = ratio <= TRANSPORT_C and kmin > 0
    record(6, ok, f"max|J| / (h^2 + dt) = {ratio:.3f} (C = {TRANSPORT_C}), min kappa {kmin:.3f}")
    assert ok


def test_criterion_07_profile():
    prof = build_corrugation_profile(0.5, (256, 256))
    defect = prof.identity_defect()
    # independent check: spectral z2-derivative of the tabulated Gamma
    k = np.fft.fftfreq(256, 1.0 / 256)
    dG = np.real(np.fft.ifft(1j * k[None, :, None] * np.fft.fft(prof.gamma, axis=1), axis=1))
    v = dG + np.array([1.0, 0.0])
    spectral = np.max(np.abs(np.sum(v * v, -1) - (1 + prof.z1[:, None] ** 2)))
    mean = np.max(np.abs(prof.gamma.mean(axis=1)))
    period = np.max(np.abs(F_eval(prof.z1, 2 * np.pi) - prof.gamma[:, 0]))
    closure = np.max(np.abs(j0(prof.alpha) - 1 / np.sqrt(1 + prof.z1**2)))
    ok = defect < 1e-8 and spectral < 1e-8 and mean < 1e-10 and period < 1e-10 and closure < 1e-10
    record(7, ok, f"identity {defect:.1e} (spectral {spectral:.1e}), mean {mean:.1e}, period {period:.1e}")
    assert ok


def F_eval(z1, z2):
    from fluidgeom.nash_kuiper.profile import evaluate

    return evaluate(z1, z2).G


def _flat(grid, s):
    X1, X2 = grid.mesh()
    jac = np.broadcast_to(np.array([[s, 0.0], [0.0, s], [0.0, 0.0]]), grid.shape + (3, 2))
    return Immersion(grid, np.stack([s * X1, s * X2, 0 * X1], -1), dy=jac)


def test_criterion_08_embedding_engine():
    grid = Grid2D.from_extent((0, 1), (0, 1), 257, 257)
    g = MetricField(grid, 1.0, 0.0, 1.0)
    t0 = time.perf_counter()
    _, diag = run_embedding(_flat(grid, 0.9), g, StageParams(), seed=1, on_stall="continue", on_budget="stop")
    elapsed = time.perf_counter() - t0
    d = np.r_[0.19, diag.column("deficit_sup")]
    c1 = diag.column("c1_step")
    ratios = d[1:] / d[:-1]
    stages = len(diag.rows)
    ok = (
        stages >= 3
        and np.all(ratios < 1)
        and ratios.max() <= 0.6
        and np.all(np.diff(np.log(c1)) < 0)
        and d[-1] < 1e-2
        and elapsed < 300
    )
    record(
        8,
        ok,
        f"{stages} stage(s) before {diag.stop_reason}, deficits "
        + " ".join(f"{x:.4f}" for x in d)
        + f", {elapsed:.1f} s",
    )
    assert ok


def test_criterion_09_time_switch_energy():
    grid = Grid2D.from_extent((0, 1), (0, 1), 257, 257)
    params = StageParams()
    gstar = D.gstar_metric(D.ShearProfile(lambda x: np.zeros_like(x), A=2.0), grid)
    runs = time_switch_sequence([_flat(grid, 1.8), _flat(grid, 1.8)], gstar, params, seeds=[1, 2])
    region = grid.interior(params.pad)
    target = D.energy(gstar, region=region)
    rel = [abs(D.energy(y, region=region) - target) / target for y, _ in runs]
    ok = max(rel) < 1e-3
    record(9, ok, "relative energy errors " + ", ".join(f"{r:.2e}" for r in rel) + " (bound 1e-3)")
    assert ok


def test_criterion_10_elasto_classification():
    grid = Grid2D.from_extent((-1, 1), (-1, 1), 33, 33)
    times = np.linspace(0, 2, 41)
    w = E.sine_profile()
    t0 = time.perf_counter()
    out = {}
    for pair in ((1, 1), (-1, 1), (-1, -1)):
        m = E.traveling_wave_motion(w, pair)
        tr = E.current_config_steadiness(m, (0.3, 0.7), times)
        caveat = max(np.max(np.abs(E.es2_residual(m, grid, t)[3].values)) for t in times[::8])
        wave = max(np.max(np.abs(r.values)) for t in times[::8] for r in E.wave_equation_residual(m, grid, t))
        out[pair] = (tr.is_steady, tr.variation, caveat, wave)
    elapsed = time.perf_counter() - t0
    ok = (
        out[(1, 1)][0]
        and out[(1, 1)][1] < 1e-10
        and not out[(-1, 1)][0]
        and out[(-1, 1)][2] > 0.1
        and out[(-1, -1)][0]
        and out[(-1, -1)][1] < 1e-10
        and all(v[3] < 1e-10 for v in out.values())
        and elapsed < 1.0
    )
    detail = ", ".join(f"{p}: {'steady' if v[0] else 'unsteady'} var {v[1]:.1e}" for p, v in out.items())
    record(10, ok, f"{detail}; caveat (-,+) {out[(-1, 1)][2]:.2f}; {elapsed:.2f} s")
    assert ok


def test_criterion_11_gromov():
    rng = np.random.default_rng(11)
    r1, r2, r3 = rng.uniform(-2, 2, (3, 10000))
    U1, U2, P = F.gromov_identification(F.GromovTriple(r1, r2, r3))
    worst = max(np.max(np.abs(U1 * U1 + P - r1)), np.max(np.abs(U2 * U2 + P - r3)), np.max(np.abs(U1 * U2 - np.abs(r2))))
    # P is the smaller eigenvalue of [[r1, r2], [r2, r3]]
    eig = np.linalg.eigvalsh(np.moveaxis(np.array([[r1, r2], [r2, r3]]), -1, 0))[:, 0]
    ok = worst < 1e-12 and np.max(np.abs(P - eig)) < 1e-12
    record(11, ok, f"identification residual {worst:.1e}, P vs eigenvalue {np.max(np.abs(P - eig)):.1e}")
    assert ok


def test_criterion_12_determinism(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code = cli.main(["embed", "--out", str(out), "--seed", "7"])
        outs.append((code, out))
    names = ("embedding.obj", "diagnostics.csv", "manifest.json")
    same = all((outs[0][1] / n).read_bytes() == (outs[1][1] / n).read_bytes() for n in names)
    status = json.loads((outs[0][1] / "manifest.json").read_text())["status"]
    ok = same and outs[0][0] == outs[1][0]
    record(12, ok, f"byte-identical {', '.join(names)} (exit {outs[0][0]}, status {status})")
    assert ok
