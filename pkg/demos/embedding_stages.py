"""Convex-integration stages on the 0.9-scaled flat chart against the identity metric.

Prints the per-stage deficit and step sizes.  On a 257 x 257 grid the second stage
already needs a corrugation frequency beyond the grid budget, so the run stops.

Run: python3 demos/embedding_stages.py [n]
"""
import sys

import numpy as np

from fluidgeom.geometry import Immersion, MetricField
from fluidgeom.grid import Grid2D
from fluidgeom.nash_kuiper import StageParams, build_corrugation_profile, lambda_cap, run_embedding


def main(n=257):
    grid = Grid2D.from_extent((0, 1), (0, 1), n, n)
    X1, X2 = grid.mesh()
    jac = np.broadcast_to(np.array([[0.9, 0.0], [0.0, 0.9], [0.0, 0.0]]), grid.shape + (3, 2))
    y0 = Immersion(grid, np.stack([0.9 * X1, 0.9 * X2, 0 * X1], -1), dy=jac)
    g = MetricField(grid, 1.0, 0.0, 1.0)
    params = StageParams()
    prof = build_corrugation_profile(params.delta_star)
    print(f"profile identity defect {prof.identity_defect():.1e}; frequency budget {lambda_cap(grid, params):.1f}")
    for q in range(3):
        print(f"stage {q}: frequencies", " ".join(f"{params.lam(q, j):.4g}" for j in (1, 2, 3, 4)))
    _, diag = run_embedding(y0, g, params, seed=1, profile=prof, on_stall="continue", on_budget="stop")
    print("initial deficit 0.19")
    for row in diag.rows:
        print(f"stage {row['q']}: deficit {row['deficit_sup']:.4f}, C0 step {row['c0_step']:.2e}, C1 step {row['c1_step']:.3f}")
    print("stopped:", diag.stop_reason)


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 257)
