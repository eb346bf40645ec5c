"""Developable surface of a shear flow: L = M = 0, N = u^2 and zero Brioschi curvature.

Run: python3 demos/shear_surface.py
"""
import numpy as np

from fluidgeom import developable as D
from fluidgeom.geometry import brioschi_curvature, induced_metric, second_fundamental_form
from fluidgeom.grid import Grid2D


def main():
    grid = Grid2D.from_extent((-0.5, 0.5), (-0.5, 0.5), 33, 33)
    sp = D.ShearProfile(lambda x: 0.3 + 0.4 * np.sin(3 * x), A=2.0, du=lambda x: 1.2 * np.cos(3 * x))
    y = D.shear_surface(sp, grid)
    ff = second_fundamental_form(y)
    X1, X2 = grid.mesh()
    print("max |L|, |M|:", np.abs(ff.L).max(), np.abs(ff.M).max())
    print("max |N - u^2|:", np.abs(ff.N - sp.velocity(X2) ** 2).max())
    print("max |kappa| (Brioschi):", np.abs(brioschi_curvature(induced_metric(y)).values).max())
    c, A = 0.7, 2.0
    x = np.linspace(-0.5, 0.5, 11)
    const = D.ShearProfile(lambda s: np.full_like(s, c), A=A)
    fp = D.integrate_profile(const, x).fp
    print("RK4 slope vs -A tan(A c^2 x):", np.abs(fp - D.tan_closed_form(c, A, x)).max())
    print("the arctan variant misses by:", np.abs(fp + A * np.arctan(A * c * c * x)).max())


if __name__ == "__main__":
    main()
