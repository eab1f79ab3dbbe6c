"""Metropolis sampling of a 1D Riesz gas compared with its thermal density."""
import numpy as np

from rieszgas.equilibrium import solve_thermal
from rieszgas.grid import Grid
from rieszgas.kernels import riesz
from rieszgas.potentials import Potential
from rieszgas.sampler import SamplerConfig, mann_kendall, run_chains

spec, V = riesz(1, 0.25), Potential()
N, beta = 32, 1.0
cfg = SamplerConfig(N=N, beta=beta, n_steps=3000, burn_in=500, thinning=10, seed=11)
chains = run_chains(spec, V, cfg, 2)
for c in chains:
    p = mann_kendall(c.energy_trace[c.energy_trace.size // 2:], batches=20)[2]
    print(f"chain {c.chain_id}: acceptance {c.acceptance_rate:.2f}, step {c.step_size:.3f}, trend p-value {p:.2f}")

grid = Grid.cube(1, 2.0, 512)
theta = N * beta
mu = solve_thermal(V, spec, grid, theta).density
x = np.concatenate([c.points[:, 0] for ch in chains for c in ch.configurations])
edges = np.linspace(-1.5, 1.5, 13)
hist, _ = np.histogram(x, bins=edges, density=True)
xs = grid.axes[0]
print("bin centre   sampled   thermal")
for lo, hi, h in zip(edges[:-1], edges[1:], hist):
    ref = mu.values[(xs >= lo) & (xs < hi)].mean()
    print(f"{(lo + hi) / 2:10.2f}   {h:7.3f}   {ref:7.3f}")
