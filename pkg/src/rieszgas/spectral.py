"""Riemann sums of weighted quadratic forms ``int |v^(xi)|^2 w(xi) dxi`` on padded grids."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.special import gamma

from .errors import DivergenceError
from .grid import Grid, unit_sphere_area

# fraction of the sum allowed in the outer 20% of the frequency box
TAIL_FRACTION = 1e-3


def radial_power_gauss_integral(d: int, p: float, sigma: float) -> float:
    """``int_{R^d} exp(-sigma^2 |xi|^2) |xi|^p dxi`` for ``p > -d``."""
    return float(unit_sphere_area(d) * gamma((d + p) / 2) / (2 * sigma ** (d + p)))


def quadratic_form(values: np.ndarray, grid: Grid, weight, power: float | None = None,
                   pad: int = 2, sigma: float | None = None, weight_gauss_integral=None,
                   correct_mass: bool = True) -> float:
    """``int |v^|^2 w dxi`` with ``v^`` the unitary transform of the cell field ``values``.

    ``weight`` maps an array of frequencies ``(..., d)`` to weights; its value
    at ``xi = 0`` is never used. If the field has nonzero mass the singular
    part ``|v^(0)|^2 exp(-sigma^2 |xi|^2) w`` is removed from the sum and
    integrated exactly, either as a radial power ``|xi|^power`` or with the
    supplied ``weight_gauss_integral(sigma)``. ``correct_mass=False`` skips
    that step, which is exact when the weight vanishes at zero frequency and
    ``pad = 1`` (periodic transform on the box).
    """
    d, h = grid.d, grid.h
    m = pad * grid.n
    vhat = np.fft.rfftn(values, s=(m,) * d, axes=tuple(range(d))) * (h ** d / (2 * np.pi) ** (d / 2))
    k = 2 * np.pi * np.fft.fftfreq(m, h)
    kr = 2 * np.pi * np.fft.rfftfreq(m, h)
    axes = [k] * (d - 1) + [kr]
    xi = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    r2 = np.sum(xi * xi, axis=-1)
    # rfft stores half the spectrum: double every column except 0 and Nyquist
    mult = np.full(kr.shape, 2.0)
    mult[0] = 1.0
    if m % 2 == 0:
        mult[-1] = 1.0
    dxi = (2 * np.pi / (m * h)) ** d
    zero = (0,) * d
    w = np.zeros(r2.shape)
    nz = r2 > 0
    w[nz] = weight(xi[nz])
    dens = np.abs(vhat) ** 2
    mass = float(np.sum(values) * h ** d)
    scale = float(np.sum(np.abs(values)) * h ** d)
    extra = 0.0
    if correct_mass and abs(mass) > 1e-12 * max(scale, 1e-300):
        if weight_gauss_integral is None and (power is None or power <= -d):
            raise DivergenceError("nonzero mass: the quadratic form diverges at zero frequency")
        if sigma is None:
            # match the per-axis variance so the remainder starts at fourth order
            wts = np.abs(values)
            mesh = grid.mesh()
            var = 0.0
            for m_ in mesh:
                c = np.sum(wts * m_) / np.sum(wts)
                var += np.sum(wts * (m_ - c) ** 2) / np.sum(wts)
            sigma = float(np.clip(np.sqrt(var / d), 2 * h, grid.side / 4))
        v0 = mass ** 2 / (2 * np.pi) ** d
        dens = dens - v0 * np.exp(-sigma ** 2 * r2)
        extra = v0 * (weight_gauss_integral(sigma) if weight_gauss_integral is not None
                      else radial_power_gauss_integral(d, power, sigma))
    terms = dens * w * mult
    # zero cell: the integrand tends to 0 when 2 + power > 0; for power = -2 it
    # has a direction-dependent limit, estimated by averaging one neighbour per axis
    zp = 2.0 + (power if power is not None else -2.0)
    if zp > 0:
        terms[zero] = 0.0
    else:
        nb = []
        for ax in range(d):
            idx = [0] * d
            idx[ax] = 1
            nb.append(dens[tuple(idx)] * w[tuple(idx)])
        terms[zero] = float(np.mean(nb))
    total = float(np.sum(terms) * dxi)
    kmax = np.pi / h
    outer = float(np.sum(np.abs(terms[r2 > (0.8 * kmax) ** 2])) * dxi)
    # roundoff floor: a field with no content at nonzero frequencies must not warn
    floor = 1e-24 * float(np.sum(np.abs(vhat) ** 2 * mult) * dxi) * float(np.max(np.abs(w)))
    if outer > TAIL_FRACTION * max(abs(total + extra), floor, 1e-300):
        warnings.warn(f"spectral tail holds {outer / max(abs(total + extra), 1e-300):.2e} of the "
                      "quadratic form; the field is under-resolved", RuntimeWarning, stacklevel=3)
    return total + extra
