"""Dual Hölder norms of discrete signed measures."""
import numpy as np

from rieszgas.harness.oracles import matching_w1
from rieszgas.measures import SignedDiscreteMeasure
from rieszgas.norms import holder_dual

a, b, alpha = 0.2, 1.5, 0.75
nu = SignedDiscreteMeasure([[a], [b]], [1.0, -1.0])
r = abs(a - b)
print(f"two points, alpha={alpha}: homogeneous {holder_dual(nu, alpha).value:.10f} (closed form {r ** alpha:.10f})")
print(f"                   full        {holder_dual(nu, alpha, 'full').value:.10f} "
      f"(closed form {2 * r ** alpha / (2 + r ** alpha):.10f})")

rng = np.random.default_rng(1)
x, y = rng.random((10, 2)), rng.random((10, 2))
nu = SignedDiscreteMeasure(np.vstack([x, y]), np.r_[np.full(10, 0.1), np.full(10, -0.1)])
print(f"10 vs 10 atoms, alpha=1: LP {holder_dual(nu, 1.0).value:.10f}, matching W1 {matching_w1(x, y):.10f}")
