"""Thermal equilibria approach the zero-temperature measure as theta grows."""
import numpy as np

from rieszgas.equilibrium import solve_equilibrium, solve_thermal
from rieszgas.grid import Grid
from rieszgas.kernels import riesz
from rieszgas.potentials import Potential

spec, V = riesz(1, 0.25), Potential()
grid = Grid.cube(1, 2.0, 512)
mu_inf = solve_equilibrium(V, spec, grid).density
print("theta     sup mu_theta   L1 distance to mu_inf   fixed-point residual")
for theta in (10.0, 100.0, 1000.0):
    sol = solve_thermal(V, spec, grid, theta)
    l1 = np.abs(sol.density.values - mu_inf.values).sum() * grid.cell_volume
    print(f"{theta:7.0f}   {sol.sup:12.4f}   {l1:21.4e}   {sol.fixed_point_residual:.2e}")
