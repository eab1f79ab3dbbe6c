"""Dual Hölder norms by linear programming, function norms and the distance certificate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import cdist
from scipy.spatial import cKDTree

from ..errors import LPCapError
from ..grid import Grid, unit_ball_volume
from ..measures import DensityMeasure, ParticleConfiguration, SignedDiscreteMeasure

LP_CAP = 600
FEASIBILITY_TOL = 1e-9
_HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass
class DualNormResult:
    value: float
    dual_function: np.ndarray
    mode: str
    infinite: bool = False
    constraint_rounds: int = 0
    active_pairs: int = 0
    lipschitz_budget: float | None = None
    sup_budget: float | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "mode": self.mode, "infinite": self.infinite,
                "constraint_rounds": self.constraint_rounds, "active_pairs": self.active_pairs}


def _seed_pairs(dist: np.ndarray, k: int = 8, line: np.ndarray | None = None) -> set:
    n = dist.shape[0]
    pairs = set()
    if n < 2:
        return pairs
    if line is not None:
        # on the line the spanning tree is the sorted chain
        order = np.argsort(line, kind="stable")
        a, b = order[:-1], order[1:]
        pairs.update(zip(np.minimum(a, b).tolist(), np.maximum(a, b).tolist()))
        if k == 0:
            return pairs
    kk = min(k, n - 1)
    if kk > 0:
        nbrs = np.argsort(dist + np.diag(np.full(n, np.inf)), axis=1)[:, :kk]
        for i in range(n):
            for j in nbrs[i]:
                pairs.add((min(i, j), max(i, j)))
    if line is not None:
        return pairs
    # the spanning tree keeps every relaxation bounded
    tree = minimum_spanning_tree(dist + 1e-300).tocoo()
    for i, j in zip(tree.row, tree.col):
        pairs.add((min(i, j), max(i, j)))
    return pairs


def holder_dual(nu: SignedDiscreteMeasure, alpha: float, mode: str = "homogeneous", cap: int = LP_CAP,
                max_rounds: int = 100, add_per_round: int = 2000) -> DualNormResult:
    """``sup { int f dnu : f admissible }`` over functions on the support of ``nu``.

    ``homogeneous``: ``|f_i - f_j| <= |x_i - x_j|^alpha`` with ``f_0 = 0``;
    infinite when the total mass is nonzero. ``full``: ``|f_i - f_j| <= L
    |x_i - x_j|^alpha``, ``|f_i| <= M``, ``L + M <= 1`` with ``L, M`` free
    variables. Pair constraints are added lazily (most violated first) from a
    seed of nearest neighbours plus a spanning tree; the final ``f`` is
    rescaled so it is feasible to ``1e-9`` and ``value`` is its objective.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if mode not in ("homogeneous", "full"):
        raise ValueError(f"unknown mode {mode!r}")
    if nu.n > 1 and len(np.unique(nu.support, axis=0)) != nu.n:
        # coincident atoms are combined; dual_function then follows the merged support order
        nu = nu.merged(SignedDiscreteMeasure(np.zeros((0, nu.d)), np.zeros(0), validate=False))
    n = nu.n
    if n > cap:
        raise LPCapError(f"support has {n} atoms, above the LP cap {cap}; thin the measure "
                         "(e.g. quantize with top_k) or raise the cap")
    w = nu.weights
    if n == 0:
        return DualNormResult(0.0, np.zeros(0), mode)
    if mode == "homogeneous":
        scale = float(np.sum(np.abs(w)))
        if abs(float(np.sum(w))) > 1e-12 * max(scale, 1e-300):
            return DualNormResult(float("inf"), np.zeros(n), mode, infinite=True)
    if n == 1:
        if mode == "homogeneous":
            return DualNormResult(0.0, np.zeros(1), mode)
        f = np.array([np.sign(w[0])])
        return DualNormResult(abs(float(w[0])), f, mode, lipschitz_budget=0.0, sup_budget=1.0)

    dist = cdist(nu.support, nu.support) ** alpha
    # on the line with alpha = 1 the chain of neighbours implies every pair constraint
    line = nu.support[:, 0] if nu.d == 1 else None
    pairs = _seed_pairs(dist, k=0 if (line is not None and alpha == 1) else 8, line=line)
    nvar = n + (2 if mode == "full" else 0)
    c = np.zeros(nvar)
    c[:n] = -w
    if mode == "homogeneous":
        bounds = [(0.0, 0.0)] + [(None, None)] * (n - 1)
    else:
        bounds = [(None, None)] * n + [(0.0, 1.0), (0.0, 1.0)]

    iu, ju = np.triu_indices(n, 1)
    rounds = 0
    x = None
    while True:
        rounds += 1
        A, b = _constraints(pairs, dist, n, mode)
        res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs", options=_HIGHS_OPTIONS)
        if res.status != 0:
            raise RuntimeError(f"LP solve failed: {res.message}")
        x = res.x
        f = x[:n]
        lip = x[n] if mode == "full" else 1.0
        viol = np.abs(f[iu] - f[ju]) - lip * dist[iu, ju]
        bad = np.flatnonzero(viol > 1e-12)
        if bad.size == 0 or rounds >= max_rounds:
            break
        bad = bad[np.argsort(-viol[bad], kind="stable")[:add_per_round]]
        for t in bad:
            pairs.add((int(iu[t]), int(ju[t])))
        # plus each atom's worst partner, which spreads the new cuts over the support
        V = np.abs(f[:, None] - f[None, :]) - lip * dist
        np.fill_diagonal(V, -np.inf)
        worst = np.argmax(V, axis=1)
        for i in np.flatnonzero(V[np.arange(n), worst] > 1e-12):
            j = int(worst[i])
            pairs.add((min(i, j), max(i, j)))

    f = x[:n].copy()
    if mode == "homogeneous":
        ratio = np.max(np.abs(f[iu] - f[ju]) / dist[iu, ju])
        f = f / max(1.0, ratio)
        return DualNormResult(float(w @ f), f, mode, constraint_rounds=rounds, active_pairs=len(pairs))
    lip_needed = float(np.max(np.abs(f[iu] - f[ju]) / dist[iu, ju]))
    sup_needed = float(np.max(np.abs(f)))
    f = f / max(1.0, lip_needed + sup_needed)
    return DualNormResult(float(w @ f), f, mode, constraint_rounds=rounds, active_pairs=len(pairs),
                          lipschitz_budget=float(x[n]), sup_budget=float(x[n + 1]))


def _constraints(pairs: set, dist: np.ndarray, n: int, mode: str):
    p = np.array(sorted(pairs), dtype=np.int64)
    m = len(p)
    rows = np.repeat(np.arange(2 * m), 2)
    vals = np.tile([1.0, -1.0], 2 * m)
    dij = dist[p[:, 0], p[:, 1]]
    if mode == "homogeneous":
        A = coo_matrix((vals, (rows, _pair_cols(p))), shape=(2 * m, n))
        return A.tocsr(), np.concatenate([dij, dij])
    # f_i - f_j - L d_ij <= 0 (both orders), |f_i| - M <= 0, L + M <= 1
    r = list(rows)
    cc = list(_pair_cols(p))
    v = list(vals)
    for k in range(2 * m):
        r.append(k)
        cc.append(n)
        v.append(-float(dij[k % m]))
    base = 2 * m
    for i in range(n):
        r += [base + 2 * i, base + 2 * i, base + 2 * i + 1, base + 2 * i + 1]
        cc += [i, n + 1, i, n + 1]
        v += [1.0, -1.0, -1.0, -1.0]
    r += [base + 2 * n, base + 2 * n]
    cc += [n, n + 1]
    v += [1.0, 1.0]
    A = coo_matrix((v, (r, cc)), shape=(base + 2 * n + 1, n + 2))
    b = np.zeros(base + 2 * n + 1)
    b[-1] = 1.0
    return A.tocsr(), b


def _pair_cols(p: np.ndarray) -> np.ndarray:
    # rows 0..m-1: f_i - f_j ; rows m..2m-1: f_j - f_i
    first = np.column_stack([p[:, 0], p[:, 1]])
    second = np.column_stack([p[:, 1], p[:, 0]])
    return np.concatenate([first, second]).reshape(-1)


# ---------------------------------------------------------------------------
# function norms


def holder_seminorm(f: np.ndarray, grid: Grid, alpha: float, anchors: int = 64, seed: int = 0) -> float:
    """Max of ``|f(x) - f(y)| / |x - y|^alpha`` over adjacent pairs and anchor-to-all pairs.

    Anchors are the arg-max and arg-min cells plus ``anchors - 2`` cells drawn
    with a fixed seed; this is a lower estimate of the true seminorm.
    """
    f = np.asarray(f, float)
    h = grid.h
    best = 0.0
    for ax in range(grid.d):
        diff = np.abs(np.diff(f, axis=ax))
        if diff.size:
            best = max(best, float(diff.max()) / h ** alpha)
    flat = f.ravel()
    pts = grid.points().reshape(-1, grid.d)
    rng = np.random.default_rng(seed)
    picks = {int(np.argmax(flat)), int(np.argmin(flat))}
    picks.update(int(i) for i in rng.choice(flat.size, size=min(flat.size, max(anchors - 2, 0)), replace=False))
    for i in sorted(picks):
        r = np.sqrt(np.sum((pts - pts[i]) ** 2, axis=1))
        r[i] = np.inf
        best = max(best, float(np.max(np.abs(flat - flat[i]) / r ** alpha)))
    return best


def function_norms(f: np.ndarray, grid: Grid, alpha: float, s: float | None = None, periodic: bool = False) -> dict:
    """Sup, Lipschitz, Hölder, ``H^1`` and (optionally) ``H^s`` seminorms of a grid function.

    ``periodic`` is passed to ``hs_fourier``.
    """
    from .sobolev import hs_fourier

    f = np.asarray(f, float)
    grads = np.gradient(f, grid.h) if grid.d > 1 else [np.gradient(f, grid.h)]
    gnorm2 = sum(g * g for g in grads)
    out = {
        "sup": float(np.max(np.abs(f))),
        "lipschitz": float(np.sqrt(np.max(gnorm2))),
        "holder": holder_seminorm(f, grid, alpha),
        "h1_seminorm": float(np.sqrt(np.sum(gnorm2) * grid.cell_volume)),
    }
    if s is not None:
        out["hs_seminorm"] = hs_fourier(f, grid, s, periodic=periodic)
    return out


# ---------------------------------------------------------------------------
# lower-bound certificate


@dataclass
class Certificate:
    certified_value: float
    bound: float
    lam: float
    radius: float

    def to_dict(self) -> dict:
        return {"certified_value": self.certified_value, "bound": self.bound, "lambda": self.lam,
                "radius": self.radius}


def certificate_bound(N: int, d: int, alpha: float, M: float) -> float:
    """Closed-form floor ``N^(-alpha/d) / (2^((d+1)/d) (M k_d)^(1/d))``, ``k_d`` the unit-ball volume."""
    if not M > 0:
        raise ValueError("density bound M must be positive")
    return float(N ** (-alpha / d) / (2 ** ((d + 1) / d) * (M * unit_ball_volume(d)) ** (1 / d)))


def _min_distance(points: np.ndarray, X: np.ndarray, cutoff: float) -> np.ndarray:
    """Distance to the nearest particle, ``inf`` beyond ``cutoff`` (k-d tree query)."""
    dist, _ = cKDTree(X).query(points, k=1, distance_upper_bound=cutoff)
    return dist


def distance_lower_bound_certificate(X: ParticleConfiguration, mu: DensityMeasure, alpha: float,
                                     M: float | None = None) -> Certificate:
    """Test ``(lambda N^(-alpha/d) - dist(x, X)^alpha)_+`` against ``emp_N - mu``.

    The test function has unit homogeneous Hölder seminorm, so the returned
    ``certified_value`` bounds the dual norm from below. ``lambda =
    (2 M k_d)^(-1/d)`` with ``M`` defaulting to the grid sup of ``mu``.
    """
    grid = mu.grid
    d, N = grid.d, X.N
    if M is None:
        M = mu.sup
    if not M > 0:
        raise ValueError("density bound M must be positive")
    lam = (2 * M * unit_ball_volume(d)) ** (-1 / d)
    top = lam * N ** (-alpha / d)
    radius = top ** (1 / alpha)
    pts = grid.points().reshape(-1, d)
    dist = _min_distance(pts, X.points, radius)
    phi = np.zeros(len(dist))
    near = np.isfinite(dist)
    phi[near] = np.maximum(top - dist[near] ** alpha, 0.0)
    integral = float(np.sum(phi * mu.values.ravel()) * grid.cell_volume)
    return Certificate(top - integral, certificate_bound(N, d, alpha, M), float(lam), float(radius))
