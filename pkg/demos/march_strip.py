"""March a metric off a non-characteristic line through Taylor-Green forms.

The constraint residuals on the trusted cone shrink at second order under
refinement, and the marched metric stays short for the developable metric with A = 2.

Run: python3 demos/march_strip.py
"""
import numpy as np

from fluidgeom import constraint as C
from fluidgeom import developable as D
from fluidgeom import fluid as F
from fluidgeom.geometry import FundamentalForm
from fluidgeom.grid import Grid2D

BASE = (np.pi / 4, np.pi / 4)


def main():
    ff = F.lmn_from_fluid(F.taylor_green_fixture(Grid2D.from_extent((0, 1), (0, 1), 9, 9), analytic=True))
    names = ("velocity div", "flow div", "codazzi 1", "codazzi 2", "gauss")
    prev = None
    for n in (33, 65, 129):
        chart = C.strip_chart(n, 0.5, width=0.07, base=BASE)
        rep = C.march_metric(C.InitialLineData.prescribed(ff, chart), ff, chart)
        chart = C.RotatedChart(rep.metric.grid, BASE)
        X1, X2 = chart.original_mesh()
        forms = FundamentalForm(rep.metric.grid, *(j.v for j in ff.closure(X1, X2)))
        res = C.constraint_residuals(forms, rep.metric, chart=chart)
        pad = max(2, (n - 1) // 16)
        mask = rep.mask.copy()
        mask[:pad] = mask[-pad:] = False
        mask[:, :pad] = mask[:, -pad:] = False
        cur = np.array([np.abs(r.values[mask]).max() for r in res])
        line = ", ".join(f"{nm} {v:.2e}" for nm, v in zip(names, cur))
        if prev is not None:
            line += "  orders " + " ".join(f"{o:.2f}" for o in np.log2(prev[1:] / cur[1:]))
        print(f"n = {n}: {line}")
        prev = cur
    gstar = D.gstar_metric(D.ShearProfile(lambda x: np.zeros_like(x), A=2.0), rep.metric.grid, points=(X1, X2))
    print("min shortness margin on the cone:", D.shortness_margin(rep.metric, gstar).values[rep.mask].min())


if __name__ == "__main__":
    main()
