"""Configuration parsing, text output formats and the ``fluidgeom`` command line.

Every run writes ``manifest.json`` into ``--out`` (also on failure) next to the
command's meshes and CSV tables.  The manifest holds no timestamps, so identical
configuration and seed give byte-identical files; wall-clock time goes to
``timing.json``.  Exit codes: 0 success, 2 validation failure, 1 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    IoError,
    MissingRequired,
    TypeMismatch,
    UnknownKey,
    ValidationError,
)

REQUIRED = object()

# name -> (type, default)
SCHEMAS: Dict[str, Dict[str, tuple]] = {
    "duality-check": {"p_shift": (float, 1.0), "analytic": (bool, False), "samples": (int, 10000)},
    "init-march": {
        "half_width": (float, 0.5),
        "width": (float, 0.07),
        "base_x1": (float, math.pi / 4),
        "base_x2": (float, math.pi / 4),
        "A": (float, 2.0),
        "p_shift": (float, 1.0),
    },
    "shear-surface": {
        "A": (float, 2.0),
        "profile": (str, "constant"),
        "u0": (float, 0.5),
        "k": (float, 1.0),
        "x1_min": (float, -0.5),
        "x1_max": (float, 0.5),
        "x2_min": (float, -0.5),
        "x2_max": (float, 0.5),
    },
    "embed": {
        "scale": (float, 0.9),
        "extent": (float, 1.0),
        "K": (float, 4.2),
        "a": (float, 0.49),
        "beta": (float, 1.0),
        "alpha": (float, 0.1),
        "delta0": (float, 0.45),
        "mu0": (float, 0.9),
        "inflation": (float, 0.02),
        "max_stages": (int, 6),
        "target": (float, 1e-2),
        "delta_star": (float, 0.5),
        "pad": (int, 12),
        "nyquist_fraction": (float, 0.25),
    },
    "kappa-transport": {
        "gamma": (float, 1.0),
        "steps": (int, 100),
        "cfl": (float, 0.4),
        "c1": (float, 1.0),
        "c2": (float, 0.5),
        "amplitude": (float, 0.3),
        "scheme": (str, "muscl"),
    },
    "elasto-wave": {
        "profile": (str, "sine"),
        "amplitude": (float, 1.0),
        "k": (float, 1.0),
        "band_width": (float, 0.1),
        "x0_1": (float, 0.3),
        "x0_2": (float, 0.7),
        "t_end": (float, 2.0),
        "n_times": (int, 41),
        "rho0": (float, 1.0),
    },
    "symbol-check": {"samples": (int, 1000), "form_samples": (int, 10000)},
}

DEFAULT_GRIDS = {
    "duality-check": (65, 65),
    "init-march": (129, 129),
    "shear-surface": (33, 33),
    "embed": (257, 257),
    "kappa-transport": (129, 129),
    "elasto-wave": (33, 33),
    "symbol-check": (5, 5),
}


@dataclass
class RunConfig:
    command: str
    params: dict
    out: str = "."
    seed: int = 0
    grid: tuple = (33, 33)
    order: int = 2


def _convert(kind, raw, key, lineno):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind is str:
            if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
                return raw[1:-1]
            return raw
        if kind is int:
            return int(raw, 10)
        val = float(raw)
        if not math.isfinite(val):
            raise ValueError(raw)
        return val
    except ValueError:
        err = TypeMismatch(f"line {lineno}: {key} expects {kind.__name__}, got {raw!r}")
        err.line = lineno
        raise err from None


def parse_config(text: str, command: str = "embed", schema: Optional[dict] = None) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) against the command's schema.

    Missing keys take their defaults; keys whose default is ``REQUIRED`` must be given.
    Errors carry the offending line number in ``.line``.
    """
    schema = SCHEMAS[command] if schema is None else schema
    params = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            err = TypeMismatch(f"line {lineno}: expected 'key = value'")
            err.line = lineno
            raise err
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in schema:
            err = UnknownKey(f"line {lineno}: unknown key {key!r}")
            err.line = lineno
            raise err
        params[key] = _convert(schema[key][0], raw, key, lineno)
    for key, (_, default) in schema.items():
        if key not in params:
            if default is REQUIRED:
                err = MissingRequired(f"missing required key {key!r}")
                err.line = None
                raise err
            params[key] = default
    return RunConfig(command, params)


# Output formats


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def _atomic_write(path, text: str):
    d = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(d, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def mesh_text(y) -> str:
    pts = np.asarray(getattr(y, "y", y), dtype=float)
    if pts.ndim != 3 or pts.shape[2] != 3:
        raise ValidationError("mesh samples must have shape (nx, ny, 3)")
    nx, ny = pts.shape[:2]
    if nx < 2 or ny < 2:
        raise ValidationError("mesh needs at least 2 nodes per direction")
    lines = ["v %.17g %.17g %.17g" % tuple(p) for p in pts.reshape(-1, 3)]
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j + 1
            lines.append(f"f {a} {a + ny} {a + ny + 1} {a + 1}")
    return "\n".join(lines) + "\n"


def write_mesh(y, path):
    """Wavefront-style mesh: vertices in row-major node order, then 1-based quads."""
    _atomic_write(path, mesh_text(y))


def write_diagnostics(rows: Sequence, path, columns: Sequence[str]):
    """CSV with a header row; reals as ``%.17g``.  Rows are dicts or sequences."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        vals = [r[c] for c in columns] if isinstance(r, dict) else list(r)
        w.writerow([_fmt(v) for v in vals])
    _atomic_write(path, buf.getvalue())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def write_manifest(manifest: dict, path):
    _atomic_write(path, json.dumps(_jsonable(manifest), sort_keys=True, indent=2) + "\n")


def _version():
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        from . import __version__

        return __version__


# Subcommands; each returns (diagnostic scalars, output files)


def _square_grid(cfg, lo, hi):
    from .grid import Grid2D

    nx, ny = cfg.grid
    return Grid2D.from_extent((lo, hi), (lo, hi), nx, ny)


def _max_abs(f):
    return float(np.max(np.abs(getattr(f, "values", f))))


def cmd_duality_check(cfg: RunConfig):
    from . import fluid as F
    from .geometry import gauss_residual
    from .grid import ScalarField

    p = cfg.params
    grid = _square_grid(cfg, 0.0, 2 * math.pi)
    s = F.taylor_green_fixture(grid, p["p_shift"], analytic=p["analytic"])
    ff = F.lmn_from_fluid(s)
    su, sv = F.fluid_from_lmn(ff)
    kappa = ScalarField(grid, s.p**2 + s.p * s.q2)
    zero = np.zeros(grid.shape)
    e1, e2, e3 = F.euler_residual(s, zero, zero, cfg.order)
    rows = [
        ("speed_u", _max_abs(su.values - np.abs(s.u))),
        ("speed_v", _max_abs(sv.values - np.abs(s.v))),
        ("gauss", _max_abs(gauss_residual(ff, kappa))),
        ("euler_1", _max_abs(e1)),
        ("euler_2", _max_abs(e2)),
        ("divergence", _max_abs(e3)),
        ("pressure_poisson", _max_abs(F.pressure_poisson_residual(s, cfg.order))),
    ]
    rng = np.random.default_rng(cfg.seed)
    n = p["samples"]
    u, v = rng.uniform(-2, 2, n), rng.uniform(-2, 2, n)
    pr = rng.uniform(0.1, 2, n)
    L, M, N = v**2 + pr, -u * v, u**2 + pr
    a, b = F._split_squares(N - L, M * M)
    rows.append(("random_roundtrip", float(max(np.max(np.abs(np.sqrt(a) - np.abs(u))), np.max(np.abs(np.sqrt(b) - np.abs(v)))))))
    rows.append(("random_gauss", float(np.max(np.abs(L * N - M * M - (pr**2 + pr * (u * u + v * v)))))))
    write_diagnostics(rows, os.path.join(cfg.out, "residuals.csv"), ("quantity", "max_abs"))
    return dict(rows), ["residuals.csv"]


def cmd_init_march(cfg: RunConfig):
    from . import constraint as C
    from . import developable as D
    from . import fluid as F
    from .geometry import FundamentalForm
    from .grid import Grid2D

    p = cfg.params
    base = (p["base_x1"], p["base_x2"])
    src_grid = Grid2D.from_extent((0, 1), (0, 1), 9, 9)
    ff = F.lmn_from_fluid(F.taylor_green_fixture(src_grid, p["p_shift"], analytic=True))
    chart = C.strip_chart(cfg.grid[0], p["half_width"], width=p["width"], base=base)
    rep = C.march_metric(C.InitialLineData.prescribed(ff, chart), ff, chart)
    g = rep.metric
    chart = C.RotatedChart(g.grid, base)
    X1, X2 = chart.original_mesh()
    forms = FundamentalForm(g.grid, *(j.v for j in ff.closure(X1, X2)))
    res = C.constraint_residuals(forms, g, chart=chart, order=cfg.order)
    # exclusion band of fixed physical width (two spacings of a 33-node line)
    pad = max(2, (cfg.grid[0] - 1) // 16)
    mask = rep.mask.copy()
    mask[:pad] = mask[-pad:] = False
    mask[:, :pad] = mask[:, -pad:] = False
    names = ("velocity_divergence", "flow_divergence", "codazzi_1", "codazzi_2", "gauss")
    rows = [(nm, float(np.max(np.abs(r.values[mask])))) for nm, r in zip(names, res)]
    sp = D.ShearProfile(lambda x: np.zeros_like(x), A=p["A"])
    gstar = D.gstar_metric(sp, g.grid, points=(X1, X2))
    margin = D.shortness_margin(g, gstar).values[rep.mask]
    rows.append(("shortness_margin_min", float(margin.min())))
    rows.append(("strip_width", rep.width))
    write_diagnostics(rows, os.path.join(cfg.out, "march.csv"), ("quantity", "value"))
    return dict(rows), ["march.csv"]


def cmd_shear_surface(cfg: RunConfig):
    from . import developable as D
    from .geometry import brioschi_curvature, induced_metric, second_fundamental_form
    from .grid import Grid2D

    p = cfg.params
    if p["profile"] == "constant":
        c = p["u0"]
        sp = D.ShearProfile(lambda x: np.full_like(x, c), A=p["A"], du=lambda x: np.zeros_like(x))
    elif p["profile"] == "sine":
        c, k = p["u0"], p["k"]
        sp = D.ShearProfile(lambda x: c * np.sin(k * x), A=p["A"], du=lambda x: c * k * np.cos(k * x))
    else:
        raise ValidationError("profile must be 'constant' or 'sine'")
    nx, ny = cfg.grid
    grid = Grid2D.from_extent((p["x1_min"], p["x1_max"]), (p["x2_min"], p["x2_max"]), nx, ny)
    y = D.shear_surface(sp, grid)
    ff = second_fundamental_form(y)
    g = induced_metric(y)
    gs = D.gstar_metric(sp, grid)
    u = sp.velocity(grid.mesh()[1])
    diag = {
        "max_abs_L": _max_abs(ff.L),
        "max_abs_M": _max_abs(ff.M),
        "max_abs_N_minus_u2": _max_abs(ff.N - u**2),
        "max_abs_brioschi": _max_abs(brioschi_curvature(g)),
        "max_abs_gstar_mismatch": max(_max_abs(g.g11 - gs.g11), _max_abs(g.g12 - gs.g12), _max_abs(g.g22 - gs.g22)),
    }
    write_mesh(y, os.path.join(cfg.out, "surface.obj"))
    X1, X2 = grid.mesh()
    rows = zip(X1.ravel(), X2.ravel(), gs.g11.ravel(), gs.g12.ravel(), gs.g22.ravel())
    write_diagnostics(list(rows), os.path.join(cfg.out, "gstar.csv"), ("x1", "x2", "g11", "g12", "g22"))
    return diag, ["surface.obj", "gstar.csv"]


def cmd_embed(cfg: RunConfig):
    from .geometry import Immersion, MetricField
    from .grid import Grid2D
    from .nash_kuiper import CSV_COLUMNS, StageParams, run_embedding

    p = dict(cfg.params)
    scale, extent = p.pop("scale"), p.pop("extent")
    params = StageParams(**p)
    nx, ny = cfg.grid
    grid = Grid2D.from_extent((0, extent), (0, extent), nx, ny)
    X1, X2 = grid.mesh()
    jac = np.broadcast_to(np.array([[scale, 0.0], [0.0, scale], [0.0, 0.0]]), grid.shape + (3, 2))
    y0 = Immersion(grid, np.stack([scale * X1, scale * X2, 0.0 * X1], -1), dy=jac)
    g = MetricField(grid, np.ones(grid.shape), np.zeros(grid.shape), np.ones(grid.shape))
    files = ["embedding.obj", "diagnostics.csv"]
    try:
        y, diag = run_embedding(y0, g, params, seed=cfg.seed, on_stall="continue")
    except BudgetExceeded as e:
        y, diag = e.partial
        write_mesh(y, os.path.join(cfg.out, "embedding.obj"))
        write_diagnostics(diag.rows, os.path.join(cfg.out, "diagnostics.csv"), CSV_COLUMNS)
        e.diagnostics = {"stages_completed": len(diag.rows), "stop_reason": "budget"}
        e.outputs = files
        raise
    write_mesh(y, os.path.join(cfg.out, "embedding.obj"))
    write_diagnostics(diag.rows, os.path.join(cfg.out, "diagnostics.csv"), CSV_COLUMNS)
    return {"stages_completed": len(diag.rows), "stop_reason": diag.stop_reason}, files


def cmd_kappa_transport(cfg: RunConfig):
    from . import fluid as F
    from .grid import Grid2D, ScalarField

    p = cfg.params
    n1, n2 = cfg.grid
    h1, h2 = 2 * math.pi / n1, 2 * math.pi / n2
    grid = Grid2D(n1, n2, h1, h2)
    X1, X2 = grid.mesh()
    c1, c2, amp, gamma = p["c1"], p["c2"], p["amplitude"], p["gamma"]

    def rho(t):
        return 1.0 + amp * np.sin(X1 - c1 * t) * np.sin(X2 - c2 * t)

    s = F.CompressibleState(grid, rho(0.0), np.full(grid.shape, c1), np.full(grid.shape, c2), gamma=gamma)
    kappa = ScalarField(grid, (1.0 + s.q2) * rho(0.0) ** 2)
    speed = max(abs(c1), abs(c2), 1e-300)
    dt = p["cfl"] * min(h1, h2) / speed
    rows = []
    t = 0.0
    for k in range(1, p["steps"] + 1):
        kappa = F.kappa_transport_step(kappa, s, dt, scheme=p["scheme"])
        t += dt
        J = np.sqrt(kappa.values / (1.0 + s.q2)) - rho(t)
        rows.append((k, t, float(np.max(np.abs(J))), float(kappa.values.min())))
    write_diagnostics(rows, os.path.join(cfg.out, "transport.csv"), ("step", "t", "max_abs_J", "min_kappa"))
    diag = {"max_abs_J": rows[-1][2], "min_kappa": min(r[3] for r in rows), "dt": dt, "h": max(h1, h2)}
    return diag, ["transport.csv"]


def cmd_elasto_wave(cfg: RunConfig):
    from . import elasto as E
    from .grid import Grid2D

    p = cfg.params
    if p["profile"] == "sine":
        w = E.sine_profile(p["amplitude"], p["k"])
    elif p["profile"] == "band":
        w = E.band_profile(p["amplitude"], p["band_width"])
    else:
        raise ValidationError("profile must be 'sine' or 'band'")
    nx, ny = cfg.grid
    grid = Grid2D.from_extent((-1, 1), (-1, 1), nx, ny)
    times = np.linspace(0.0, p["t_end"], p["n_times"])
    rows = []
    for pair in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        m = E.traveling_wave_motion(w, pair)
        es2 = [max(_max_abs(r) for r in [E.es2_residual(m, grid, t, rho0=p["rho0"])[i] for t in times[:: max(1, len(times) // 5)]]) for i in range(4)]
        wave = max(_max_abs(r) for t in times for r in E.wave_equation_residual(m, grid, t))
        tr = E.current_config_steadiness(m, (p["x0_1"], p["x0_2"]), times)
        label = "".join("+" if s > 0 else "-" for s in pair)
        rows.append((label, es2[0], es2[1], es2[2], es2[3], wave, tr.variation, tr.is_steady))
    cols = ("signs", "es2_1", "es2_2", "es2_3", "caveat", "wave", "variation", "steady")
    write_diagnostics(rows, os.path.join(cfg.out, "classification.csv"), cols)
    return {r[0]: ("steady" if r[7] else "unsteady") for r in rows}, ["classification.csv"]


def cmd_symbol_check(cfg: RunConfig):
    from .constraint import coefficient_matrix, shear_symbol_determinant

    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(p["samples"]):
        xi = rng.normal(size=2)
        u2, pr = rng.uniform(0, 4), rng.uniform(0.1, 4)
        worst = max(worst, abs(shear_symbol_determinant(u2, pr, xi)))
    n = p["form_samples"]
    L, N = rng.uniform(0.2, 3, n) * rng.choice([-1, 1], n), rng.uniform(0.2, 3, n)
    M = rng.uniform(-3, 3, n)
    _, det, closed = coefficient_matrix(L, M, N)
    gap = float(np.max(np.abs(det - closed)))
    rows = [("max_abs_symbol_det", worst), ("max_abs_det_gap", gap)]
    write_diagnostics(rows, os.path.join(cfg.out, "symbol.csv"), ("quantity", "value"))
    if worst >= 1e-12 or gap >= 1e-12:
        raise ValidationError("degeneracy check failed")
    return dict(rows), ["symbol.csv"]


COMMANDS: Dict[str, Callable] = {
    "duality-check": cmd_duality_check,
    "init-march": cmd_init_march,
    "shear-surface": cmd_shear_surface,
    "embed": cmd_embed,
    "kappa-transport": cmd_kappa_transport,
    "elasto-wave": cmd_elasto_wave,
    "symbol-check": cmd_symbol_check,
}


def _grid_arg(text):
    try:
        a, b = text.lower().split("x")
        nx, ny = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like NXxNY, e.g. 129x129") from None
    if nx < 5 or ny < 5:
        raise argparse.ArgumentTypeError("grid needs at least 5 nodes per direction")
    return nx, ny


def _seed_arg(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fluidgeom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value parameter file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=_seed_arg, default=0)
        sp.add_argument("--grid", type=_grid_arg, default=None, help="NXxNY")
        sp.add_argument("--order", type=int, choices=(2, 4), default=2)
    return parser


def run(cfg: RunConfig) -> int:
    """Execute a configured command, always leaving a manifest behind."""
    manifest = {
        "command": cfg.command,
        "config": dict(sorted(cfg.params.items())),
        "seed": cfg.seed,
        "grid": {"nx": cfg.grid[0], "ny": cfg.grid[1]},
        "order": cfg.order,
        "version": _version(),
    }
    t0 = time.perf_counter()
    code = 0
    try:
        diag, outputs = COMMANDS[cfg.command](cfg)
        manifest.update(status="ok", diagnostics=diag, outputs=outputs)
    except ValidationError as e:
        code = 2
        manifest.update(
            status="validation_error",
            error={"type": type(e).__name__, "message": str(e)},
            diagnostics=getattr(e, "diagnostics", {}),
            outputs=getattr(e, "outputs", []),
        )
    except Exception as e:  # noqa: BLE001 - every failure must reach the manifest
        code = 1
        manifest.update(status="runtime_error", error={"type": type(e).__name__, "message": str(e)})
    write_manifest(manifest, os.path.join(cfg.out, "manifest.json"))
    write_manifest({"wall_clock_s": time.perf_counter() - t0}, os.path.join(cfg.out, "timing.json"))
    if code:
        print(f"{manifest['error']['type']}: {manifest['error']['message']}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(text, args.command)
    except (ValidationError, OSError) as e:
        os.makedirs(args.out, exist_ok=True)
        write_manifest(
            {"command": args.command, "status": "validation_error", "error": {"type": type(e).__name__, "message": str(e)}},
            os.path.join(args.out, "manifest.json"),
        )
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    cfg.out = args.out
    cfg.seed = args.seed
    cfg.grid = args.grid or DEFAULT_GRIDS[args.command]
    cfg.order = args.order
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
