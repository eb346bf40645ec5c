"""Stages, the stage schedule and run diagnostics.

A stage at index ``q`` uses ``delta_q = delta0 K^(-a q)``, ``mu_q = mu0 K^(q J)`` and the
mollification width ``l = delta_q / mu_q``.  It mollifies the map and the metric,
decomposes the inflated deficit ``(1 + c) g~ - v~^# e`` with ``c = inflation * delta_q^2``
into primitive metrics, rescales map and amplitudes by ``(1 + c)^(-1/2)`` and adds one
corrugation per direction with frequency ``lambda_j = K^(j+1) / l``.  Direction slots
are fixed (``e1``: j = 1, ``e2``: j = 2, ``diag+``: j = 3, ``diag-``: j = 4), so the
schedule depends on ``q`` only.  Steps whose amplitude stays below
``amplitude_floor`` everywhere (roundoff-level deficits) are skipped.

Frequencies above ``pi / (4 h)`` cannot be represented without aliasing; the run then
stops with :class:`BudgetExceeded` carrying the partial result.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from ..errors import BudgetExceeded, StageStall, ValidationError
from ..geometry import Immersion, SymmetricField
from ..grid import diff
from .profile import CorrugationProfile, build_corrugation_profile
from .steps import (
    StepInfo,
    cone_fraction,
    corrugation_step,
    cutoff_ramp,
    metric_deficit,
    min_eig,
    mollify,
    mollify_map,
    primitive_decomposition,
)

J_N = 3
SLOTS = {"e1": 1, "e2": 2, "diag+": 3, "diag-": 4}
CSV_COLUMNS = ("q", "deficit_sup", "c0_step", "c1_step", "c2_norm", "lambda_max")


@dataclass(frozen=True)
class StageParams:
    """Schedule and tolerances of the embedding iteration.

    Windows: ``K >= 2^(1/a)``, ``a < min(1/2, beta J / (2 - beta))`` and
    ``alpha < min(beta / 2, 1 / (1 + 2 J))`` with ``J = 3``.
    """

    K: float = 4.2
    a: float = 0.49
    beta: float = 1.0
    alpha: float = 0.1
    delta0: float = 0.45
    mu0: float = 0.9
    r: float = 0.5
    inflation: float = 0.02
    max_stages: int = 6
    target: float = 1e-2
    delta_star: float = 0.5
    ramp: int = 8
    pad: int = 12
    rank_bound: float = 100.0
    nyquist_fraction: float = 0.25
    amplitude_floor: float = 1e-6

    def __post_init__(self):
        for name in ("K", "a", "beta", "alpha", "delta0", "mu0", "r", "target", "delta_star"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.inflation < 0:
            raise ValidationError("inflation must be nonnegative")
        if not self.beta < 2:
            raise ValidationError("beta must be below 2")
        if not self.a < min(0.5, self.beta * J_N / (2 - self.beta)):
            raise ValidationError("a outside its window")
        if self.K < 2 ** (1 / self.a) * (1 - 1e-12):
            raise ValidationError("K must be at least 2^(1/a)")
        if not self.alpha < min(self.beta / 2, 1 / (1 + 2 * J_N)):
            raise ValidationError("alpha outside its window")
        if self.max_stages < 1 or self.ramp < 0 or self.pad < 1:
            raise ValidationError("max_stages, ramp and pad must be positive")

    def delta(self, q):
        return self.delta0 * self.K ** (-self.a * q)

    def mu(self, q):
        return self.mu0 * self.K ** (q * J_N)

    def width(self, q):
        return self.delta(q) / self.mu(q)

    def lam(self, q, j):
        return self.K ** (j + 1) / self.width(q)


@dataclass
class EmbedDiagnostics:
    """Append-only per-stage records."""

    rows: List[dict] = field(default_factory=list)
    steps: List[List[StepInfo]] = field(default_factory=list)
    stop_reason: str = ""

    def append(self, row, steps):
        self.rows.append(dict(row))
        self.steps.append(list(steps))

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def deficit_ratios(self):
        d = self.column("deficit_sup")
        return d[1:] / d[:-1]

    def csv_rows(self):
        return [tuple(r[c] for c in CSV_COLUMNS) for r in self.rows]


def lambda_cap(grid, params: StageParams) -> float:
    return params.nyquist_fraction * math.pi / max(grid.h1, grid.h2)


def _mollify_metric(g: SymmetricField, l: float) -> SymmetricField:
    return SymmetricField(g.grid, *(mollify(c, l, g.grid) for c in (g.g11, g.g12, g.g22)))


def _scale_map(y: Immersion, s: float) -> Immersion:
    return Immersion(y.grid, s * y.y, dy=s * y.first_derivatives())


def c2_norm(y: Immersion, pad: int) -> float:
    """Sup over interior nodes of the second derivatives of the tracked Jacobian."""
    J = y.first_derivatives()
    g = y.grid
    I = g.interior(pad)
    d = np.stack([diff(J, 0, g.h1, 4), diff(J, 1, g.h2, 4)], -1)
    return float(np.max(np.abs(d[I])))


def _phase_rng(seed, q):
    return None if seed is None else np.random.default_rng([int(seed), int(q)])


def run_stage(
    y: Immersion,
    g: SymmetricField,
    params: StageParams,
    q: int,
    profile: Optional[CorrugationProfile] = None,
    seed: Optional[int] = None,
):
    """One stage; returns the new map, a diagnostics row and the step records.

    Raises :class:`BudgetExceeded` (with ``partial = (map, steps)``) when a
    required frequency exceeds the grid budget.
    """
    grid = y.grid
    profile = profile or build_corrugation_profile(params.delta_star)
    pad = params.pad
    I = grid.interior(pad)
    l = params.width(q)
    y_m = mollify_map(y, l)
    g_m = _mollify_metric(g, l)
    c = params.inflation * params.delta(q) ** 2
    h_m, _ = metric_deficit(y_m, SymmetricField(grid, (1 + c) * g_m.g11, (1 + c) * g_m.g12, (1 + c) * g_m.g22))
    h_in, theta = cone_fraction(h_m)
    prims = primitive_decomposition(h_in)
    s = 1.0 / math.sqrt(1 + c)
    v = _scale_map(y_m, s)
    chi = cutoff_ramp(grid, params.ramp)
    cap = lambda_cap(grid, params)
    rng = _phase_rng(seed, q)
    infos = []
    lam_used = 0.0
    for pm in prims:
        phase = 0.0 if rng is None else float(rng.uniform(0, 2 * np.pi))
        if not np.any(pm.a > params.amplitude_floor):
            continue
        lam = params.lam(q, SLOTS[pm.name])
        if lam > cap:
            raise BudgetExceeded(
                f"stage {q} needs lambda = {lam:.4g} above the grid budget {cap:.4g}", q, (v, infos)
            )
        pm_s = replace(pm, a=s * pm.a)
        v, info = corrugation_step(v, pm_s, lam, profile, phase, chi, params.rank_bound)
        infos.append(info)
        lam_used = max(lam_used, lam)
    _, sup = metric_deficit(v, g, pad)
    row = {
        "q": q,
        "deficit_sup": sup,
        "c0_step": float(np.max(np.abs(v.y[I] - y.y[I]))),
        "c1_step": float(np.max(np.abs(v.first_derivatives()[I] - y.first_derivatives()[I]))),
        "c2_norm": c2_norm(v, pad),
        "lambda_max": lam_used,
        "cone_fraction_min": float(theta[I].min()),
        "in_ball": bool(np.max(np.abs(np.stack([g.g11 - g.g11.mean(), g.g12 - g.g12.mean(), g.g22 - g.g22.mean()]))) <= params.r),
    }
    return v, row, infos


def run_embedding(
    y0: Immersion,
    g: SymmetricField,
    params: StageParams = StageParams(),
    seed: Optional[int] = None,
    profile: Optional[CorrugationProfile] = None,
    on_budget: str = "raise",
    on_stall: str = "raise",
):
    """Iterate stages until the interior deficit falls below ``params.target``.

    ``on_budget`` / ``on_stall`` are ``"raise"`` or ``"stop"``; with ``"stop"`` the
    map after the last completed stage is returned and the reason recorded.
    """
    if on_budget not in ("raise", "stop") or on_stall not in ("raise", "stop", "continue"):
        raise ValidationError("unknown stopping policy")
    profile = profile or build_corrugation_profile(params.delta_star)
    diag = EmbedDiagnostics()
    h, sup = metric_deficit(y0, g, params.pad)
    if sup < params.target:
        diag.stop_reason = "target"
        return y0, diag
    if not np.all(min_eig(h)[g.grid.interior(params.pad)] > 0):
        raise ValidationError("initial map is not short")
    y = y0
    for q in range(params.max_stages):
        try:
            y_new, row, infos = run_stage(y, g, params, q, profile, seed)
        except BudgetExceeded as e:
            diag.stop_reason = "budget"
            if on_budget == "stop":
                return y, diag
            raise BudgetExceeded(str(e), q, (y, diag)) from None
        stalled = row["deficit_sup"] >= sup
        diag.append(row, infos)
        if stalled and on_stall != "continue":
            diag.stop_reason = "stall"
            if on_stall == "raise":
                raise StageStall(f"deficit did not decrease at stage {q}", q, (y_new, diag))
            return y_new, diag
        y, sup = y_new, row["deficit_sup"]
        if sup < params.target:
            diag.stop_reason = "target"
            return y, diag
    diag.stop_reason = "max_stages"
    return y, diag


def time_switch_sequence(
    short_maps: Sequence[Immersion],
    gstar: SymmetricField,
    params: StageParams = StageParams(),
    seeds: Optional[Sequence[int]] = None,
    on_budget: str = "stop",
):
    """Independent embeddings of ``gstar``, one per time subinterval.

    Each subinterval ``k`` starts from its own short map and uses seed ``seeds[k]``
    for the corrugation phases.  Returns a list of ``(map, diagnostics)``.
    """
    seeds = list(range(len(short_maps))) if seeds is None else list(seeds)
    if len(seeds) != len(short_maps):
        raise ValidationError("one seed per subinterval is required")
    profile = build_corrugation_profile(params.delta_star)
    return [
        run_embedding(y, gstar, params, seed, profile, on_budget=on_budget, on_stall="stop")
        for y, seed in zip(short_maps, seeds)
    ]


def holder_quotient(y: Immersion, alpha: float, max_sep: int = 8, pad: int = 2) -> float:
    """Largest ``|dy(x + d) - dy(x)| / |d|^alpha`` over axis shifts of 1 to ``max_sep`` nodes."""
    J = y.first_derivatives()
    g = y.grid
    I = g.interior(pad)
    J = J[I]
    best = 0.0
    for sep in range(1, max_sep + 1):
        for axis, h in ((0, g.h1), (1, g.h2)):
            a = np.take(J, np.arange(sep, J.shape[axis]), axis=axis)
            b = np.take(J, np.arange(0, J.shape[axis] - sep), axis=axis)
            q = np.max(np.linalg.norm((a - b).reshape(a.shape[:2] + (-1,)), axis=-1)) / (sep * h) ** alpha
            best = max(best, float(q))
    return best
