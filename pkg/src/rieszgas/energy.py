"""Energy functionals, the next-order energy and the splitting identities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import SingularityError
from .grid import Grid, interpolate
from .kernels import KernelSpec, fourier_symbol, radial_profile
from .measures import GridMeasure, ParticleConfiguration, SignedDiscreteMeasure, entropy, potential_field
from .potentials import as_grid_potential
from .spectral import quadratic_form


def pair_sum(points: np.ndarray, spec: KernelSpec, weights: np.ndarray | None = None) -> float:
    """``sum_{i != j} w_i w_j g(x_i - x_j)`` over ordered pairs."""
    pts = np.asarray(points, float)
    n = pts.shape[0]
    if n < 2 or spec.family == "none":
        return 0.0
    if spec.builtin:
        r = pdist(pts)
        if np.any(r == 0):
            raise SingularityError("coincident points")
        g = radial_profile(spec, r)
    else:
        iu, ju = np.triu_indices(n, 1)
        diff = pts[iu] - pts[ju]
        if np.any(np.all(diff == 0, axis=1)):
            raise SingularityError("coincident points")
        g = np.asarray(spec.g(diff), float)
    if weights is None:
        return float(2.0 * np.sum(g))
    iu, ju = np.triu_indices(n, 1)
    return float(2.0 * np.sum(weights[iu] * weights[ju] * g))


def interaction_energy(mu, spec: KernelSpec, method: str = "spectral") -> float:
    """Interaction energy.

    Grid measures: ``int |mu^|^2 m dxi`` (``method="spectral"``) or
    ``int h^mu dmu`` with the singular-cell corrected potential
    (``method="direct"``). Atomic measures: the off-diagonal sum
    ``sum_{i != j} w_i w_j g(x_i - x_j)``.
    """
    if isinstance(mu, SignedDiscreteMeasure):
        return pair_sum(mu.support, spec, mu.weights)
    if not isinstance(mu, GridMeasure):
        raise TypeError("expected a grid measure or a signed discrete measure")
    if spec.family == "none":
        return 0.0
    if method == "direct":
        h = potential_field(mu, spec, check_padding=False)
        return mu.integrate(h)
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    if spec.is_log:
        # equal-mass differences are integrable; the Gaussian reference energy is explicit
        return quadratic_form(mu.values, mu.grid, lambda xi: fourier_symbol(spec, xi),
                              weight_gauss_integral=lambda sig: (2 * np.pi) ** 2 * _log_gauss_energy(spec, sig))
    if spec.builtin:
        return quadratic_form(mu.values, mu.grid, lambda xi: fourier_symbol(spec, xi), power=-2 * spec.s)
    return quadratic_form(mu.values, mu.grid, lambda xi: fourier_symbol(spec, xi),
                          weight_gauss_integral=lambda sig: _custom_gauss_integral(spec, sig))


def _log_gauss_energy(spec: KernelSpec, sigma: float) -> float:
    """Log-kernel energy of the centred Gaussian with per-axis variance ``sigma^2`` (d=2)."""
    return float(-spec.c * 0.5 * (np.log(4 * sigma ** 2) - np.euler_gamma))


def _custom_gauss_integral(spec: KernelSpec, sigma: float) -> float:
    """``int exp(-sigma^2|xi|^2) m(xi) dxi`` assuming a radial symbol."""
    from scipy.integrate import quad

    from .grid import unit_sphere_area

    e1 = np.eye(spec.d)[0]
    f = lambda r: r ** (spec.d - 1) * np.exp(-sigma ** 2 * r ** 2) * float(spec.ghat(r * e1))
    val, _ = quad(f, 0, np.inf, limit=200)
    return unit_sphere_area(spec.d) * val


def mean_field_energy(mu: GridMeasure, V, spec: KernelSpec, method: str = "direct") -> float:
    """``E(mu) + int V dmu``.

    The direct discretization is the one minimized by the equilibrium solver,
    so comparisons against solver output are exact at grid level.
    """
    return interaction_energy(mu, spec, method) + mu.integrate(as_grid_potential(V, mu.grid))


def free_energy(mu: GridMeasure, V, spec: KernelSpec, theta: float, method: str = "direct") -> float:
    if not theta > 0:
        raise ValueError("theta must be positive")
    return mean_field_energy(mu, V, spec, method) + entropy(mu) / theta


def _check_inside(grid: Grid, pts: np.ndarray) -> None:
    if not np.all(grid.contains(pts)):
        raise ValueError("particle outside the grid box")


def f_n(X: ParticleConfiguration, mu: GridMeasure, spec: KernelSpec, h: np.ndarray | None = None,
        energy: float | None = None) -> float:
    """Next-order energy ``(1/N^2) sum_{i!=j} g - (2/N) sum h^mu(x_i) + E(mu)``.

    ``h^mu`` is interpolated d-linearly; ``E(mu)`` defaults to ``int h^mu dmu``
    so that both terms share one discretization.
    """
    _check_inside(mu.grid, X.points)
    if h is None:
        h = potential_field(mu, spec, check_padding=False)
    if energy is None:
        energy = mu.integrate(h)
    N = X.N
    hx = interpolate(mu.grid, h, X.points)
    return pair_sum(X.points, spec) / N ** 2 - 2.0 * np.sum(hx) / N + energy


def hamiltonian(X: ParticleConfiguration, V, spec: KernelSpec, grid: Grid | None = None) -> float:
    """``sum_{i != j} g(x_i - x_j) + N sum_i V(x_i)``; ``V`` callable, or a grid array with ``grid``."""
    N = X.N
    if callable(V):
        vx = np.asarray(V(X.points), float)
    else:
        if grid is None:
            raise ValueError("a grid array potential needs its grid")
        vx = interpolate(grid, np.asarray(V, float), X.points)
    return pair_sum(X.points, spec) + N * float(np.sum(vx))


@dataclass
class SplittingResult:
    hamiltonian: float
    identity_rhs: float
    identity_residual: float
    fn_rhs: float | None
    fn_residual: float | None
    residual: float


def verify_splitting(X: ParticleConfiguration, mu, V, spec: KernelSpec, theta: float | None = None,
                     foc_tol: float = 1e-6) -> SplittingResult:
    """Compare ``H_N(X)`` with its exact expansion around ``mu``.

    ``mu`` is a grid density or an equilibrium/thermal solution. ``V`` is
    sampled on the grid and interpolated at the particles, so every term uses
    the same potential values. The reference-measure form (mean-field energy
    plus next-order energy plus confinement) is added when ``mu`` is a solver
    output whose first-order residual is at most ``foc_tol``.
    """
    solution = None
    if hasattr(mu, "density"):
        solution, mu = mu, mu.density
    grid = mu.grid
    _check_inside(grid, X.points)
    Vg = as_grid_potential(V, grid)
    N = X.N
    h = potential_field(mu, spec, check_padding=False)
    E = mu.integrate(h)
    pair = pair_sum(X.points, spec)
    hx = interpolate(grid, h, X.points)
    vx = interpolate(grid, Vg, X.points)
    H = pair + N * float(np.sum(vx))
    F = pair / N ** 2 - 2.0 * np.sum(hx) / N + E
    rhs = N ** 2 * (F - E + np.sum(2 * hx + vx) / N)
    scale = max(abs(H), abs(pair), N * float(np.sum(np.abs(vx))), N ** 2 * abs(F), N ** 2 * abs(E), 1e-300)
    res_id = abs(H - rhs) / scale

    fn_rhs = fn_res = None
    if solution is not None:
        if hasattr(solution, "theta"):
            th = solution.theta if theta is None else theta
            if solution.fixed_point_residual <= foc_tol:
                zeta = -np.log(mu.values) / th
                mean_field = E + mu.integrate(Vg) + entropy(mu) / th
                zx = interpolate(grid, zeta, X.points)
                fn_rhs = N ** 2 * (mean_field + F + np.sum(zx) / N)
        elif max(solution.foc_residual_inside, -solution.foc_residual_outside) <= foc_tol:
            zeta = 2 * h + Vg - solution.c
            mean_field = E + mu.integrate(Vg)
            zx = interpolate(grid, zeta, X.points)
            fn_rhs = N ** 2 * (mean_field + F + np.sum(zx) / N)
        if fn_rhs is not None:
            fn_res = abs(H - fn_rhs) / scale
    residual = res_id if fn_res is None else max(res_id, fn_res)
    return SplittingResult(H, rhs, res_id, fn_rhs, fn_res, residual)
