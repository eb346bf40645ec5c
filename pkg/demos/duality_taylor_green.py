"""Taylor-Green vortex as fundamental forms: the Gauss identity and the inverse map.

Run: python3 demos/duality_taylor_green.py
"""
import numpy as np

from fluidgeom import fluid as F
from fluidgeom.geometry import gauss_residual
from fluidgeom.grid import Grid2D, ScalarField


def main():
    grid = Grid2D.from_extent((0, 2 * np.pi), (0, 2 * np.pi), 65, 65)
    s = F.taylor_green_fixture(grid, p_shift=1.0)
    ff = F.lmn_from_fluid(s)
    kappa = ScalarField(grid, s.p**2 + s.p * s.q2)
    print("Gauss residual LN - M^2 - kappa:", np.abs(gauss_residual(ff, kappa).values).max())
    su, sv = F.fluid_from_lmn(ff)
    print("speed recovery |u|, |v|:", np.abs(su.values - np.abs(s.u)).max(), np.abs(sv.values - np.abs(s.v)).max())
    zero = np.zeros(grid.shape)
    for order in (2, 4):
        r = F.euler_residual(s, zero, zero, order)
        print(f"stencil order {order}: steady Euler residuals", [f"{np.abs(x.values).max():.2e}" for x in r])


if __name__ == "__main__":
    main()
