"""Grid densities, particle configurations and finitely supported signed measures."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

from .errors import PaddingError
from .grid import Grid, interpolate, sphere_quadrature
from .kernels import KernelSpec, free_space_convolution

MASS_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class GridMeasure:
    """Signed measure with a piecewise-constant density on a grid."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        values = _frozen(values)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite")
        self.grid = grid
        self.values = values

    @property
    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(self.values * f) * self.grid.cell_volume)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, GridMeasure):
            if other.grid != self.grid:
                raise ValueError("measures live on different grids")
            return other.values
        raise TypeError("can only combine with another grid measure")

    def __add__(self, other):
        return GridMeasure(self.grid, self.values + self._coerce(other))

    def __sub__(self, other):
        return GridMeasure(self.grid, self.values - self._coerce(other))

    def __mul__(self, a: float):
        return GridMeasure(self.grid, self.values * float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return GridMeasure(self.grid, -self.values)


class DensityMeasure(GridMeasure):
    """Probability density on a grid: nonnegative values with unit mass."""

    __slots__ = ()

    def __init__(self, grid: Grid, values, mass_tol: float = MASS_TOL):
        super().__init__(grid, values)
        if np.any(self.values < 0):
            raise ValueError("density values must be nonnegative")
        if abs(self.mass - 1.0) > mass_tol:
            raise ValueError(f"density mass {self.mass!r} differs from 1")

    @classmethod
    def from_values(cls, grid: Grid, values) -> "DensityMeasure":
        """Normalize arbitrary nonnegative values to unit mass."""
        values = np.asarray(values, float)
        total = np.sum(values) * grid.cell_volume
        if not total > 0:
            raise ValueError("cannot normalize a zero field")
        return cls(grid, values / total)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "DensityMeasure":
        return cls.from_values(grid, grid.evaluate(fn))

    @property
    def sup(self) -> float:
        return float(self.values.max())


class ParticleConfiguration:
    """``N`` pairwise distinct points in ``R^d``."""

    __slots__ = ("points",)

    def __init__(self, points, validate: bool = True):
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must have shape (N, d) with N >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if validate and pts.shape[0] > 1 and np.min(pdist(pts)) == 0.0:
            raise ValueError("configuration has coincident points")
        pts.setflags(write=False)
        self.points = pts

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


class SignedDiscreteMeasure:
    """Finitely supported signed measure ``sum_i w_i delta_{x_i}`` with distinct support."""

    __slots__ = ("support", "weights")

    def __init__(self, support, weights, validate: bool = True):
        sup = np.array(support, dtype=float)
        if sup.ndim == 1:
            sup = sup[:, None]
        w = np.array(weights, dtype=float).ravel()
        if sup.shape[0] != w.shape[0]:
            raise ValueError("support and weights have different lengths")
        if validate and len(w) > 1 and len(np.unique(sup, axis=0)) != len(w):
            raise ValueError("support points must be distinct")
        sup.setflags(write=False)
        w.setflags(write=False)
        self.support, self.weights = sup, w

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return self.support.shape[1]

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, np.asarray(f(self.support), float)))

    def merged(self, other: "SignedDiscreteMeasure", sign: float = 1.0) -> "SignedDiscreteMeasure":
        """``self + sign * other`` with coincident atoms combined."""
        pts = np.vstack([self.support, other.support])
        w = np.concatenate([self.weights, sign * other.weights])
        uniq, inv = np.unique(pts, axis=0, return_inverse=True)
        acc = np.zeros(len(uniq))
        np.add.at(acc, inv.ravel(), w)
        return SignedDiscreteMeasure(uniq, acc, validate=False)

    def __sub__(self, other):
        return self.merged(other, -1.0)

    def __add__(self, other):
        return self.merged(other, 1.0)

    def __mul__(self, a: float):
        return SignedDiscreteMeasure(self.support, self.weights * float(a), validate=False)

    __rmul__ = __mul__

    def dropped_zeros(self, tol: float = 0.0) -> "SignedDiscreteMeasure":
        keep = np.abs(self.weights) > tol
        return SignedDiscreteMeasure(self.support[keep], self.weights[keep], validate=False)


def empirical_measure(X: ParticleConfiguration) -> SignedDiscreteMeasure:
    return SignedDiscreteMeasure(X.points, np.full(X.N, 1.0 / X.N), validate=False)


def quantize(mu: GridMeasure, top_k: int | None = None, renormalize: bool = True) -> SignedDiscreteMeasure:
    """One atom per nonzero cell at the cell centre, weight ``value * h^d``.

    With ``top_k`` only the ``top_k`` cells of largest |weight| are kept and,
    if ``renormalize``, rescaled to the original total mass.
    """
    w = (mu.values * mu.grid.cell_volume).ravel()
    pts = mu.grid.points().reshape(-1, mu.grid.d)
    keep = np.flatnonzero(w != 0)
    if top_k is not None and len(keep) > top_k:
        order = np.argsort(-np.abs(w[keep]), kind="stable")[:top_k]
        keep = np.sort(keep[order])
        wk = w[keep]
        if renormalize and np.sum(wk) != 0:
            wk = wk * (np.sum(w) / np.sum(wk))
        return SignedDiscreteMeasure(pts[keep], wk, validate=False)
    return SignedDiscreteMeasure(pts[keep], w[keep], validate=False)


def potential_field(mu: GridMeasure, spec: KernelSpec, check_padding: bool = True,
                    padding_tol: float = 1e-8) -> np.ndarray:
    """``h^mu = g * mu`` on the grid (exact free-space convolution, singular-cell corrected)."""
    if spec.d != mu.grid.d:
        raise ValueError("kernel and grid dimensions differ")
    if check_padding:
        total = np.sum(np.abs(mu.values))
        edge = np.sum(np.abs(mu.values[mu.grid.boundary_mask()]))
        if total > 0 and edge > padding_tol * total:
            raise PaddingError(f"boundary-layer mass fraction {edge / total:.3e} exceeds {padding_tol:g}; "
                               "enlarge the box")
    return free_space_convolution(spec, mu.grid).apply(mu.values)


def potential_at(mu: GridMeasure, spec: KernelSpec, x: np.ndarray, field: np.ndarray | None = None) -> np.ndarray:
    """``h^mu`` interpolated (d-linear) at points ``x``."""
    if field is None:
        field = potential_field(mu, spec)
    return interpolate(mu.grid, field, x)


def entropy(mu: GridMeasure) -> float:
    """``int mu log mu`` with ``0 log 0 = 0``."""
    v = mu.values
    pos = v > 0
    return float(np.sum(v[pos] * np.log(v[pos])) * mu.grid.cell_volume)


def smear_ball(nu: SignedDiscreteMeasure, eta: float, grid: Grid, subsample: int = 8) -> GridMeasure:
    """Replace each atom by the uniform density on ``B(x_i, eta)``.

    Cells cut by the sphere get the fraction of ``subsample**d`` sub-points
    inside the ball; each ball is renormalized so mass is preserved exactly.
    """
    if not eta > 0:
        raise ValueError("radius must be positive")
    d, h = grid.d, grid.h
    lo, hi = np.asarray(grid.lo), np.asarray(grid.hi)
    if np.any(nu.support - eta < lo) or np.any(nu.support + eta > hi):
        raise PaddingError("smearing ball crosses the grid box boundary")
    sub = (np.arange(subsample) + 0.5) / subsample - 0.5
    offs = np.stack(np.meshgrid(*([sub] * d), indexing="ij"), axis=-1).reshape(-1, d) * h
    out = np.zeros(grid.shape)
    reach = int(np.ceil(eta / h)) + 1
    for x, w in zip(nu.support, nu.weights):
        c = grid.cell_index(x)[0]
        ranges = [np.arange(max(0, c[k] - reach), min(grid.n, c[k] + reach + 1)) for k in range(d)]
        idx = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1)
        centers = lo + (idx + 0.5) * h
        rel = centers[..., None, :] + offs - x
        frac = np.mean(np.sum(rel * rel, axis=-1) <= eta * eta, axis=-1)
        vol = np.sum(frac) * grid.cell_volume
        if vol == 0:
            frac = np.zeros(frac.shape)
            frac[tuple(c - np.array([r[0] for r in ranges]))] = 1.0
            vol = grid.cell_volume
        out[tuple(np.moveaxis(idx, -1, 0))] += w * frac / vol
    return GridMeasure(grid, out)


def smear_sphere(X: ParticleConfiguration, eta, q: int | None = None,
                 h_grid: float | None = None) -> SignedDiscreteMeasure:
    """Replace each particle by quadrature atoms on the sphere ``dB(x_i, eta_i)``.

    Default point count ``max(16, ceil(eta/h_grid)*8)`` (64 without a grid).
    """
    eta = np.broadcast_to(np.asarray(eta, float), (X.N,))
    if np.any(eta <= 0):
        raise ValueError("radii must be positive")
    pts, wts = [], []
    for x, e in zip(X.points, eta):
        qq = q if q is not None else (max(16, int(np.ceil(e / h_grid)) * 8) if h_grid else 64)
        u, w = sphere_quadrature(X.d, qq)
        pts.append(x + e * u)
        wts.append(w / X.N)
    return SignedDiscreteMeasure(np.vstack(pts), np.concatenate(wts), validate=False)


# ---------------------------------------------------------------------------
# CSV snapshots


def write_density_csv(path, mu: GridMeasure) -> None:
    d = mu.grid.d
    pts = mu.grid.points().reshape(-1, d)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow([f"x_{k + 1}" for k in range(d)] + ["value"])
        for p, v in zip(pts, mu.values.ravel()):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def read_density_csv(path, grid: Grid) -> GridMeasure:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if len(header) != grid.d + 1:
        raise ValueError("CSV column count does not match grid dimension")
    vals = np.array([float(r[-1]) for r in body])
    pts = np.array([[float(c) for c in r[:-1]] for r in body])
    if vals.size != grid.n ** grid.d or not np.allclose(pts, grid.points().reshape(-1, grid.d)):
        raise ValueError("CSV cells do not match the grid")
    return GridMeasure(grid, vals.reshape(grid.shape))


def write_configuration_csv(path, X: ParticleConfiguration) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow([f"x_{k + 1}" for k in range(X.d)])
        for p in X.points:
            w.writerow([repr(float(c)) for c in p])


def read_configuration_csv(path) -> ParticleConfiguration:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    return ParticleConfiguration(np.array([[float(c) for c in r] for r in rows[1:]]))
