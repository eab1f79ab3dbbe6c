"""Exact expansion of the Hamiltonian around the equilibrium measure."""
import numpy as np

from rieszgas.energy import verify_splitting
from rieszgas.equilibrium import solve_equilibrium
from rieszgas.grid import Grid
from rieszgas.kernels import coulomb
from rieszgas.measures import ParticleConfiguration
from rieszgas.potentials import Potential

grid = Grid.cube(2, 1.0, 128)
V = Potential()
sol = solve_equilibrium(V, coulomb(2), grid)
rng = np.random.default_rng(0)
for N in (8, 32, 64):
    X = ParticleConfiguration(0.35 * rng.standard_normal((N, 2)))
    res = verify_splitting(X, sol, V, coulomb(2))
    print(f"N={N:3d}  H_N = {res.hamiltonian:12.6f}  expansion = {res.identity_rhs:12.6f}  "
          f"relative residual {res.identity_residual:.1e}")
