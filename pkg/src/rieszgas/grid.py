"""Uniform cell-centred grids on cubic boxes, interpolation and sphere quadrature."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gamma


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n**d`` cubic cells on the box ``[lo, hi]``.

    Values live at cell centres ``lo + (i + 1/2) h``. The box must be a cube so
    that every cell is a cube of side ``h``; ``n`` must be a power of two.
    """

    d: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: int

    def __post_init__(self):
        lo = tuple(float(v) for v in np.broadcast_to(self.lo, (self.d,)))
        hi = tuple(float(v) for v in np.broadcast_to(self.hi, (self.d,)))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.d < 1:
            raise ValueError("grid dimension must be >= 1")
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"points per axis must be a power of two, got {self.n}")
        sides = np.subtract(hi, lo)
        if np.any(sides <= 0):
            raise ValueError("box must have positive side lengths")
        if not np.allclose(sides, sides[0], rtol=1e-12, atol=0.0):
            raise ValueError("box must be a cube (equal side lengths)")

    @classmethod
    def cube(cls, d: int, half_width: float, n: int, center: float = 0.0) -> "Grid":
        return cls(d, (center - half_width,) * d, (center + half_width,) * d, n)

    @property
    def side(self) -> float:
        return self.hi[0] - self.lo[0]

    @property
    def h(self) -> float:
        return self.side / self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(self.lo[k] + (np.arange(self.n) + 0.5) * self.h for k in range(self.d))

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """Cell centres as an array of shape ``shape + (d,)``."""
        return np.stack(self.mesh(), axis=-1)

    def radius(self, center=None) -> np.ndarray:
        c = np.zeros(self.d) if center is None else np.asarray(center, float)
        return np.sqrt(sum((m - c[k]) ** 2 for k, m in enumerate(self.mesh())))

    def evaluate(self, fn) -> np.ndarray:
        """Evaluate ``fn(points)`` where points has shape ``shape + (d,)``."""
        out = np.asarray(fn(self.points()), dtype=float)
        if out.shape != self.shape:
            out = np.broadcast_to(out, self.shape).copy()
        return out

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.d, self.lo, self.hi, self.n * factor)

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=-1)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_volume)

    def boundary_mask(self, width: int = 1) -> np.ndarray:
        """Cells within ``width`` cells of the box boundary."""
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.d):
            idx = [slice(None)] * self.d
            idx[k] = slice(0, width)
            mask[tuple(idx)] = True
            idx[k] = slice(self.n - width, self.n)
            mask[tuple(idx)] = True
        return mask

    def cell_index(self, x: np.ndarray) -> np.ndarray:
        """Integer cell indices (shape ``(m, d)``) of points inside the box."""
        x = np.atleast_2d(np.asarray(x, float))
        idx = np.floor((x - np.asarray(self.lo)) / self.h).astype(np.int64)
        return np.clip(idx, 0, self.n - 1)

    def to_dict(self) -> dict:
        return {"d": self.d, "lo": list(self.lo), "hi": list(self.hi), "n": self.n}


def interpolate(grid: Grid, field: np.ndarray, x: np.ndarray) -> np.ndarray:
    """d-linear interpolation of a cell-centred field at points ``x`` (m, d).

    Points in the outer half cell use constant extrapolation from the nearest
    centre. Points outside the box raise ``ValueError``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    if x.shape[-1] != grid.d:
        raise ValueError(f"points must have {grid.d} coordinates")
    if not np.all(grid.contains(x)):
        raise ValueError("interpolation point outside the grid box")
    u = (x - np.asarray(grid.lo)) / grid.h - 0.5
    u = np.clip(u, 0.0, grid.n - 1.0)
    i0 = np.minimum(np.floor(u).astype(np.int64), grid.n - 2)
    t = u - i0
    out = np.zeros(x.shape[0])
    for corner in range(2 ** grid.d):
        bits = [(corner >> k) & 1 for k in range(grid.d)]
        w = np.ones(x.shape[0])
        idx = []
        for k, b in enumerate(bits):
            w *= t[:, k] if b else 1.0 - t[:, k]
            idx.append(i0[:, k] + b)
        out += w * field[tuple(idx)]
    return out


def unit_ball_volume(d: int) -> float:
    return float(np.pi ** (d / 2) / gamma(d / 2 + 1))


def unit_sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (d=1 counts the two endpoints)."""
    return float(2 * np.pi ** (d / 2) / gamma(d / 2))


def sphere_quadrature(d: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic quadrature on the unit sphere of R^d, weights summing to 1.

    d=1: the two endpoints. d=2: ``q`` equally spaced angles (equal weights,
    spectrally accurate). d=3: Gauss-Legendre in the polar cosine times uniform
    azimuth, about ``q`` points; weights are unequal but the rule integrates
    spherical harmonics exactly up to degree ``2*nz - 1``.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if d == 2:
        phi = 2 * np.pi * (np.arange(q) + 0.5) / q
        return np.column_stack([np.cos(phi), np.sin(phi)]), np.full(q, 1.0 / q)
    if d == 3:
        nz = max(2, int(round(np.sqrt(q / 2))))
        nphi = 2 * nz
        z, wz = np.polynomial.legendre.leggauss(nz)
        phi = 2 * np.pi * (np.arange(nphi) + 0.5) / nphi
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1 - zz ** 2)
        pts = np.column_stack([(rho * np.cos(pp)).ravel(), (rho * np.sin(pp)).ravel(), zz.ravel()])
        w = np.repeat(wz / 2, nphi) / nphi
        return pts, w
    raise NotImplementedError("sphere quadrature implemented for d <= 3")
