"""Fractional Sobolev seminorms and negative-order norms on grids."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import roots_jacobi

from ..grid import Grid
from ..kernels import cube_exterior_power_integral
from ..measures import GridMeasure, SignedDiscreteMeasure
from ..spectral import quadratic_form

# offsets (sup norm, in cells) whose pair weight is integrated rather than sampled
NEAR_RANGE = 2


def hs_fourier(f: np.ndarray, grid: Grid, s: float, periodic: bool = False) -> float:
    """``(int |f^|^2 |xi|^(2s) dxi)^(1/2)``.

    By default ``f`` is zero-padded outside the box, which suits decaying
    functions. ``periodic=True`` uses the unpadded transform, i.e. the
    seminorm of the periodic extension; a constant then has only the zero
    frequency and gives 0.
    """
    weight = lambda xi: np.sum(xi * xi, axis=-1) ** s  # noqa: E731
    if periodic:
        val = quadratic_form(np.asarray(f, float), grid, weight, power=2 * s, pad=1, correct_mass=False)
    else:
        val = quadratic_form(np.asarray(f, float), grid, weight, power=2 * s)
    return float(np.sqrt(max(val, 0.0)))


def h_neg_s(nu, s: float, grid: Grid | None = None) -> float:
    """``(int |nu^|^2 |xi|^(-2s) dxi)^(1/2)``; raises ``DivergenceError`` for nonzero mass when ``2s >= d``."""
    if isinstance(nu, GridMeasure):
        values, grid = nu.values, nu.grid
    else:
        if grid is None:
            raise ValueError("a grid array needs its grid")
        values = np.asarray(nu, float)
    val = quadratic_form(values, grid, lambda xi: np.sum(xi * xi, axis=-1) ** (-s), power=-2 * s)
    return float(np.sqrt(max(val, 0.0)))


# ---------------------------------------------------------------------------
# difference-quotient form


@lru_cache(maxsize=None)
def _pair_average(k: tuple, p: float, m: int = 14) -> float:
    """``int_{[-1,1]^d} prod(1 - |w_j|) |k + w|^p dw``: mean of ``|x - y|^p`` over two unit cells offset by ``k``.

    Unit sub-boxes touching the singular point at a corner are integrated by
    pyramid decomposition with Gauss-Jacobi radial nodes; the rest by tensor
    Gauss-Legendre.
    """
    d = len(k)
    k = np.asarray(k, float)
    xg, wg = np.polynomial.legendre.leggauss(m)
    xg, wg = (xg + 1) / 2, wg / 2
    beta = d - 1 + p
    tj, wj = roots_jacobi(m, 0.0, beta)
    tj, wj = (tj + 1) / 2, wj / 2 ** (beta + 1)
    total = 0.0
    for corner in itertools.product((-1.0, 0.0), repeat=d):
        lo = k + np.asarray(corner)
        # sub-box [lo, lo+1]^d in z = k + w; weight prod(1 - |z_j - k_j|)
        if np.all((lo == 0) | (lo == -1)):
            # singular corner at z = 0: reflect so the box is [0,1]^d in u = |z|
            sgn = np.where(lo == -1, -1.0, 1.0)
            for axis in range(d):
                others = [xg] * (d - 1)
                ow = [wg] * (d - 1)
                if d > 1:
                    og = np.stack(np.meshgrid(*others, indexing="ij"), -1).reshape(-1, d - 1)
                    owt = np.prod(np.stack(np.meshgrid(*ow, indexing="ij"), -1).reshape(-1, d - 1), axis=1)
                else:
                    og, owt = np.zeros((1, 0)), np.ones(1)
                v = np.insert(og, axis, 1.0, axis=1)
                u = tj[:, None, None] * v[None]
                z = sgn * u
                weight = np.prod(1 - np.abs(z - k), axis=-1)
                r = np.sqrt(np.sum(v * v, axis=-1))
                total += float(np.sum(wj[:, None] * owt[None] * r[None] ** p * weight))
        else:
            g = np.stack(np.meshgrid(*([xg] * d), indexing="ij"), -1).reshape(-1, d) + lo
            wt = np.prod(np.stack(np.meshgrid(*([wg] * d), indexing="ij"), -1).reshape(-1, d), axis=1)
            weight = np.prod(1 - np.abs(g - k), axis=-1)
            total += float(np.sum(wt * weight * np.sum(g * g, axis=-1) ** (p / 2)))
    return total


def _pair_kernel(d: int, s: float, h: float, size: int) -> np.ndarray:
    """Pair weights ``K[k]`` on offsets ``-size..size`` per axis (``K[0] = 0``).

    Far offsets: ``h^(2d) |kh|^(-d-2s)``. Near offsets: chosen so a linear
    function gets the exact cell-pair integral, i.e. ``h^(2d) h^(-d-2s)
    A_k / |k|^2`` with ``A_k`` the cell-pair mean of ``|z|^(2-d-2s)``.
    """
    ax = np.arange(-size, size + 1)
    mesh = np.meshgrid(*([ax] * d), indexing="ij")
    r2 = sum(m * m for m in mesh).astype(float)
    K = np.zeros(r2.shape)
    nz = r2 > 0
    K[nz] = h ** d * h ** (-2 * s) * r2[nz] ** (-(d + 2 * s) / 2)
    p = 2.0 - d - 2 * s
    near = range(-NEAR_RANGE, NEAR_RANGE + 1)
    for k in itertools.product(near, repeat=d):
        kk = np.asarray(k)
        if not np.any(kk):
            continue
        if np.max(np.abs(kk)) > size:
            continue
        K[tuple(kk + size)] = h ** d * h ** (-2 * s) * _pair_average(tuple(float(v) for v in k), p) / float(kk @ kk)
    return K


def _diag_weight(d: int, s: float, h: float) -> float:
    """Same-cell pair integral per unit ``|grad f|^2``."""
    return h ** (2 * d) * h ** (2 - d - 2 * s) * _pair_average((0.0,) * d, 2.0 - d - 2 * s) / d


def _linear_conv(a: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Linear convolution of ``a`` (shape n^d) with centred ``K`` (shape (2n+1)^d), cropped to ``a``'s shape."""
    d = a.ndim
    n = a.shape[0]
    size = (K.shape[0] - 1) // 2
    m = 1
    while m < n + 2 * size + 1:
        m *= 2
    ax = tuple(range(d))
    fa = np.fft.rfftn(a, s=(m,) * d, axes=ax)
    fk = np.fft.rfftn(K, s=(m,) * d, axes=ax)
    full = np.fft.irfftn(fa * fk, s=(m,) * d, axes=ax)
    return full[tuple(slice(size, size + n) for _ in range(d))]


def _restrict_mask(grid: Grid, omega) -> np.ndarray:
    lo, hi = (np.asarray(v, float) for v in omega)
    pts = grid.points()
    return np.all((pts >= lo) & (pts <= hi), axis=-1)


def hs_dq(f: np.ndarray, grid: Grid, s: float, omega=None) -> float:
    """``(int int |f(x) - f(y)|^2 / |x - y|^(d+2s) dx dy)^(1/2)``.

    Without ``omega`` the double integral is over all of R^d with ``f = 0``
    outside the box: pairs inside the doubled box are summed by FFT and the
    part beyond it is integrated analytically about the box centre. With
    ``omega = (lo, hi)`` only pairs of cells whose centres lie in ``omega``
    count. Same-cell pairs use the local gradient.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    f = np.asarray(f, float)
    d, n, h = grid.d, grid.n, grid.h
    if omega is None:
        m = 2 * n
        F = np.zeros((m,) * d)
        off = n // 2
        F[tuple(slice(off, off + n) for _ in range(d))] = f
        inside = np.ones((m,) * d)
        exterior = 2 * np.sum(f * f) * h ** d * cube_exterior_power_integral(d, s) * (grid.side) ** (-2 * s)
    else:
        mask = _restrict_mask(grid, omega)
        F = np.where(mask, f, 0.0)
        inside = mask.astype(float)
        exterior = 0.0
    K = _pair_kernel(d, s, h, F.shape[0] - 1)
    row = _linear_conv(inside, K)
    KF = _linear_conv(F, K)
    total = 2 * np.sum(F * F * row) - 2 * np.sum(F * KF)
    grads = np.gradient(F, h) if d > 1 else [np.gradient(F, h)]
    g2 = sum(g * g for g in grads) * inside
    total += _diag_weight(d, s, h) * np.sum(g2) + exterior
    return float(np.sqrt(max(total, 0.0)))


# ---------------------------------------------------------------------------
# domain norm


def _domain_cells(omega, h: float, d: int):
    lo, hi = (np.asarray(v, float) for v in omega)
    counts = np.maximum(np.round((hi - lo) / h).astype(int), 1)
    axes = [lo[k] + (np.arange(counts[k]) + 0.5) * h for k in range(d)]
    idx = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), -1).reshape(-1, d)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    return counts, idx, pts, lo


def domain_gram(omega, h: float, d: int, s: float) -> np.ndarray:
    """Gram matrix of ``||phi||^2_{L^2(omega)} + |phi|^2_{H^s(omega)}`` in cell-centre values."""
    counts, idx, pts, lo = _domain_cells(omega, h, d)
    size = int(np.max(counts))
    K = _pair_kernel(d, s, h, size)
    diff = idx[:, None, :] - idx[None, :, :] + size
    Kij = K[tuple(np.moveaxis(diff, -1, 0))]
    A = 2 * np.diag(Kij.sum(axis=1)) - 2 * Kij
    # same-cell term: |grad phi|^2 by one-sided/central differences on the cell block
    nc = idx.shape[0]
    lookup = {tuple(v): i for i, v in enumerate(idx)}
    D = []
    for ax in range(d):
        Dk = np.zeros((nc, nc))
        for i, v in enumerate(idx):
            up = list(v)
            dn = list(v)
            up[ax] += 1
            dn[ax] -= 1
            iu, idn = lookup.get(tuple(up)), lookup.get(tuple(dn))
            if iu is not None and idn is not None:
                Dk[i, iu], Dk[i, idn] = 0.5 / h, -0.5 / h
            elif iu is not None:
                Dk[i, iu], Dk[i, i] = 1 / h, -1 / h
            elif idn is not None:
                Dk[i, i], Dk[i, idn] = 1 / h, -1 / h
        D.append(Dk)
    A += _diag_weight(d, s, h) * sum(Dk.T @ Dk for Dk in D)
    A += h ** d * np.eye(nc)
    return A


def _hat_weights(nu: SignedDiscreteMeasure, counts, lo, h: float) -> np.ndarray:
    """``w_j = int phi_j dnu`` for d-linear hat functions at the cell centres."""
    d = len(counts)
    u = (nu.support - lo) / h - 0.5
    u = np.clip(u, 0.0, counts - 1.0)
    i0 = np.minimum(np.floor(u).astype(int), np.maximum(counts - 2, 0))
    t = u - i0
    strides = np.array([int(np.prod(counts[k + 1:])) for k in range(d)])
    w = np.zeros(int(np.prod(counts)))
    for corner in itertools.product((0, 1), repeat=d):
        c = np.asarray(corner)
        wt = np.prod(np.where(c == 1, t, 1 - t), axis=1)
        j = np.minimum(i0 + c, counts - 1)
        np.add.at(w, j @ strides, nu.weights * wt)
    return w


def h_neg_s_domain(nu: SignedDiscreteMeasure, omega, s: float, h: float, cap: int = 4096,
                   cond_max: float = 1e12) -> float:
    """``sup (int phi dnu) / ||phi||_{H^s(omega)}`` over cell-centre interpolants on ``omega``.

    ``value^2 = w^T A^{-1} w`` (Cholesky). Ill-conditioned Gram matrices get a
    diagonal shift and a ``ConditioningError`` warning.
    """
    lo, hi = (np.asarray(v, float) for v in omega)
    if nu.n and (np.any(nu.support < lo - 1e-12) or np.any(nu.support > hi + 1e-12)):
        raise ValueError("measure support leaves the domain")
    counts, idx, pts, lo = _domain_cells(omega, h, nu.d)
    if idx.shape[0] > cap:
        raise ValueError(f"domain has {idx.shape[0]} cells, above the cap {cap}")
    if nu.n == 0 or not np.any(nu.weights):
        return 0.0
    A = domain_gram(omega, h, nu.d, s)
    w = _hat_weights(nu, counts, lo, h)
    cond = np.linalg.cond(A)
    if cond > cond_max:
        warnings.warn(f"domain Gram matrix condition number {cond:.2e}; using a shifted solve",
                      ConditioningWarning, stacklevel=2)
        A = A + np.eye(A.shape[0]) * np.linalg.norm(A, 2) / cond_max
    factor = cho_factor(A)
    return float(np.sqrt(max(w @ cho_solve(factor, w), 0.0)))


class ConditioningWarning(RuntimeWarning):
    pass


@dataclass
class LocalizationReport:
    full_norm: float
    local_norm: float
    ratio: float | None
    omega1: tuple


def verify_localization(nu: GridMeasure, omega, s: float, eps: float) -> LocalizationReport:
    """Ratio ``||nu||_{H^-s(R^d)} / ||nu restricted to omega_eps||_{H^-s(omega_eps)}``.

    ``nu`` must have a single sign outside ``omega``. The ratio is ``None``
    when both norms vanish.
    """
    grid = nu.grid
    lo, hi = (np.asarray(v, float) for v in omega)
    pts = grid.points()
    outside = ~np.all((pts >= lo) & (pts <= hi), axis=-1)
    vo = nu.values[outside]
    if np.any(vo > 0) and np.any(vo < 0):
        raise ValueError("measure changes sign outside the domain")
    lo1, hi1 = lo - eps, hi + eps
    # snap the fattened domain to cell boundaries so cells are not split
    glo = np.asarray(grid.lo)
    lo1 = glo + np.floor((lo1 - glo) / grid.h) * grid.h
    hi1 = glo + np.ceil((hi1 - glo) / grid.h) * grid.h
    lo1 = np.maximum(lo1, glo)
    hi1 = np.minimum(hi1, np.asarray(grid.hi))
    in1 = np.all((pts >= lo1) & (pts <= hi1), axis=-1)
    w = nu.values[in1] * grid.cell_volume
    local = SignedDiscreteMeasure(pts[in1], w, validate=False)
    full = h_neg_s(nu, s)
    loc = h_neg_s_domain(local, (lo1, hi1), s, grid.h)
    ratio = None if full == 0 and loc == 0 else (np.inf if loc == 0 else full / loc)
    return LocalizationReport(full, loc, ratio, (tuple(lo1), tuple(hi1)))
