"""Traveling shear waves in an elastic body: steady and unsteady sign pairs.

Run: python3 demos/elasto_waves.py
"""
import numpy as np

from fluidgeom import elasto as E
from fluidgeom.grid import Grid2D


def main():
    grid = Grid2D.from_extent((-1, 1), (-1, 1), 33, 33)
    times = np.linspace(0, 2, 41)
    w = E.sine_profile()
    for pair in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        m = E.traveling_wave_motion(w, pair)
        tr = E.current_config_steadiness(m, (0.3, 0.7), times)
        r1, r2, r3, cav = E.es2_residual(m, grid, 0.5)
        wave = max(np.abs(r.values).max() for r in E.wave_equation_residual(m, grid, 0.5))
        print(
            f"{m.name}: {'steady' if tr.is_steady else 'unsteady'} (variation {tr.variation:.1e}), "
            f"stress residual {max(np.abs(r.values).max() for r in (r1, r2, r3)):.1e}, "
            f"caveat {np.abs(cav.values).max():.2f}, wave residual {wave:.1e}"
        )
    ds = E.DeformationState(grid, np.broadcast_to(np.array([[1.2, 0.1], [0.0, 0.9]]), grid.shape + (2, 2)))
    T = E.neo_hookean_stress(ds)
    print("neo-Hookean density and T11 at a node:", float(ds.rho[0, 0]), float(np.asarray(T.T11)[0, 0]))


if __name__ == "__main__":
    main()
