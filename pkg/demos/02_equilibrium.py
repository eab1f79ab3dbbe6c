"""Equilibrium measure of the 2D Coulomb gas in V(x) = |x|^2.

The minimizer is uniform on a disk: density 2 on radius 1/sqrt(2 pi).
"""
import math

import numpy as np

from rieszgas.equilibrium import solve_equilibrium
from rieszgas.grid import Grid
from rieszgas.kernels import coulomb
from rieszgas.potentials import Potential

grid = Grid.cube(2, 1.0, 128)
sol = solve_equilibrium(Potential(), coulomb(2), grid)
mu = sol.density
area = sol.support_mask.sum() * grid.cell_volume
print(f"converged {sol.converged} after {sol.iterations} iterations, c = {sol.c:.6f}")
print(f"FOC residual inside {sol.foc_residual_inside:.2e}, outside {sol.foc_residual_outside:.2e}")
print(f"support radius {math.sqrt(area / math.pi):.4f}  (exact {1 / math.sqrt(2 * math.pi):.4f}, grid spacing {grid.h:.4f})")
print(f"median density on support {np.median(mu.values[sol.support_mask]):.4f}  (exact 2)")
