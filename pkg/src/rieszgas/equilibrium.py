"""Equilibrium and thermal equilibrium measures on a grid.

Both problems are solved in cell masses ``p_i = mu_i h^d``. The discrete
interaction is the free-space convolution of :mod:`rieszgas.kernels`, so the
first-order conditions hold exactly for the discrete energy that
:func:`rieszgas.energy.mean_field_energy` evaluates.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import BoxTooSmallError, DivergenceError, NotConvergedError
from .grid import Grid
from .kernels import KernelSpec, free_space_convolution
from .measures import DensityMeasure, entropy, quantize
from .potentials import as_grid_potential

SUPPORT_THRESHOLD = 1e-8


@dataclass
class EquilibriumSolution:
    density: DensityMeasure
    c: float
    support_mask: np.ndarray
    foc_residual_inside: float
    foc_residual_outside: float
    iterations: int
    converged: bool
    potential: np.ndarray
    tol: float
    energy_trace: list = field(default_factory=list)

    def metadata(self) -> dict:
        return {"kind": "equilibrium", "c": self.c, "foc_residual_inside": self.foc_residual_inside,
                "foc_residual_outside": self.foc_residual_outside, "iterations": self.iterations,
                "converged": self.converged, "tol": self.tol}


@dataclass
class ThermalSolution:
    density: DensityMeasure
    log_density: np.ndarray
    c: float
    theta: float
    fixed_point_residual: float
    iterations: int
    converged: bool
    potential: np.ndarray
    tol: float
    tau: float
    residual_trace: list = field(default_factory=list)

    @property
    def sup(self) -> float:
        return float(np.exp(np.max(self.log_density)))

    def metadata(self) -> dict:
        return {"kind": "thermal", "theta": self.theta, "c": self.c,
                "fixed_point_residual": self.fixed_point_residual, "iterations": self.iterations,
                "converged": self.converged, "tol": self.tol, "tau": self.tau}


def project_simplex(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{p >= 0, sum p = total}`` (sorting method)."""
    flat = v.ravel()
    u = np.sort(flat)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, flat.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def _mass_operator(spec: KernelSpec, grid: Grid):
    conv = free_space_convolution(spec, grid)
    cv = grid.cell_volume
    return lambda p: conv.apply(p / cv)


def _largest_eigenvalue(op, shape, iters: int = 60, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    x = rng.random(shape)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = op(x)
        lam = float(np.linalg.norm(y))
        if lam == 0:
            return 0.0
        x = y / lam
    return lam


def _check_confining(Vg: np.ndarray, grid: Grid) -> None:
    if not np.all(np.isfinite(Vg)):
        raise DivergenceError("potential is not finite on the grid")
    edge = grid.boundary_mask()
    if np.min(Vg[edge]) <= np.min(Vg[~edge]):
        raise DivergenceError("potential does not confine: its minimum lies on the box boundary")


def foc_residuals(p: np.ndarray, h: np.ndarray, Vg: np.ndarray, threshold: float = SUPPORT_THRESHOLD):
    """Support mask, constant and first-order residuals for cell masses ``p``."""
    zeta = 2 * h + Vg
    mask = p > threshold * p.max()
    c = float(np.sum(p[mask] * zeta[mask]) / np.sum(p[mask]))
    inside = float(np.max(np.abs(zeta[mask] - c)))
    outside = float(np.min(zeta[~mask] - c)) if np.any(~mask) else 0.0
    return mask, c, inside, outside


def solve_equilibrium(V, spec: KernelSpec, grid: Grid, tol: float = 1e-8, max_iter: int = 50000,
                      init=None, seed: int | None = None, check_every: int = 10,
                      raise_on_boundary: bool = True) -> EquilibriumSolution:
    """Minimize ``E(mu) + int V dmu`` over grid probability densities.

    Accelerated projected gradient (monotone FISTA) on the simplex of cell
    masses with step ``1/L``, ``L`` twice the largest eigenvalue of the
    interaction matrix. Stops when ``foc_residual_inside <= tol`` and
    ``foc_residual_outside >= -tol``.

    ``init``: ``None`` (uniform on the sublevel set containing half the cells'
    lowest potential), ``"random"`` (uses ``seed``) or a density array.
    """
    Vg = as_grid_potential(V, grid)
    _check_confining(Vg, grid)
    G = _mass_operator(spec, grid)
    cv = grid.cell_volume
    if init is None:
        p = (Vg <= np.quantile(Vg, 0.25)).astype(float)
    elif isinstance(init, str) and init == "random":
        p = np.random.default_rng(seed).random(grid.shape)
    else:
        p = np.asarray(init, float) * cv
    p = p / p.sum()
    L = 2.0 * _largest_eigenvalue(G, grid.shape)
    if L <= 0:
        L = 1.0
    step = 1.0 / L

    def energy(q, hq):
        return float(np.sum(q * hq) + np.sum(q * Vg))

    x = p
    hx = G(x)
    Ex = energy(x, hx)
    y, t = x.copy(), 1.0
    trace = [Ex]
    converged = False
    it = 0
    mask, c, inside, outside = foc_residuals(x, hx, Vg)
    for it in range(1, max_iter + 1):
        hy = G(y)
        z = project_simplex(y - step * (2 * hy + Vg))
        hz = G(z)
        Ez = energy(z, hz)
        t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
        if Ez <= Ex:
            x_new, h_new, E_new = z, hz, Ez
        else:
            x_new, h_new, E_new = x, hx, Ex
        y = x_new + (t / t_new) * (z - x_new) + ((t - 1) / t_new) * (x_new - x)
        x, hx, Ex, t = x_new, h_new, E_new, t_new
        trace.append(Ex)
        if it % check_every == 0:
            mask, c, inside, outside = foc_residuals(x, hx, Vg)
            if inside <= tol and outside >= -tol:
                converged = True
                break
            if Ez > Ex and it % (10 * check_every) == 0:
                # momentum restart keeps the iteration monotone and fast
                y, t = x.copy(), 1.0
    mask, c, inside, outside = foc_residuals(x, hx, Vg)
    converged = converged or (inside <= tol and outside >= -tol)
    if raise_on_boundary and np.any(mask & grid.boundary_mask()):
        raise BoxTooSmallError("equilibrium support touches the box boundary; enlarge the box")
    dens = DensityMeasure(grid, x / cv, mass_tol=1e-9)
    return EquilibriumSolution(dens, c, mask, inside, outside, it, converged, hx, tol, trace)


# ---------------------------------------------------------------------------
# thermal equilibrium


def _normalize_log(u: np.ndarray, cv: float) -> np.ndarray:
    return u - logsumexp(u + math.log(cv))


def _density_from_log(u: np.ndarray) -> np.ndarray:
    # strict positivity survives underflow of far tails
    return np.maximum(np.exp(u), np.finfo(float).tiny)


def thermal_residual(u: np.ndarray, h: np.ndarray, Vg: np.ndarray, theta: float, cv: float):
    """``(c_theta, sup |2h + V + u/theta - c_theta|)`` for a normalized log density ``u``."""
    phi = -theta * (2 * h + Vg)
    c = -float(logsumexp(phi + math.log(cv))) / theta
    return c, float(np.max(np.abs(2 * h + Vg + u / theta - c)))


def solve_thermal(V, spec: KernelSpec, grid: Grid, theta: float, tau: float = 0.5, max_iter: int = 3000,
                  tol: float = 1e-9, init_log_density: np.ndarray | None = None, anderson: int = 5,
                  newton: bool = True, patience: int = 50, warn: bool = True) -> ThermalSolution:
    """Solve ``2 h^mu + V + (1/theta) log mu = c_theta`` for a positive grid density.

    Damped log-space fixed point ``u <- (1-tau) u + tau (-theta (2h + V))``
    followed by renormalization, with Anderson mixing on the damped map.
    ``tau`` is halved when the residual has not improved for ``patience``
    iterations. With ``newton=True`` the damped phase is followed by
    Newton-Krylov steps on the first-order system (MINRES on its symmetrized
    Jacobian); if those fail from the best damped iterate, the problem is
    first solved at ``theta/4`` and used as a warm start. This is what makes
    ``theta >= 1e3`` tractable. The best iterate is returned, flagged
    unconverged if ``tol`` is not met.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    Vg = as_grid_potential(V, grid)
    if not np.all(np.isfinite(Vg)):
        raise DivergenceError("potential is not finite on the grid")
    G = _mass_operator(spec, grid)
    cv = grid.cell_volume
    interacting = spec.family != "none"

    def potential(u):
        return G(np.exp(u) * cv) if interacting else np.zeros(grid.shape)

    u0 = _normalize_log(-theta * Vg if init_log_density is None else np.asarray(init_log_density, float), cv)
    h0 = potential(u0)
    c0, r0 = thermal_residual(u0, h0, Vg, theta, cv)
    state = _DampedState(u0, h0, c0, r0, tau)
    first_phase = max_iter if not (newton and interacting) else min(max_iter, 4 * patience)
    _damped_iterations(state, Vg, theta, cv, potential, tol, first_phase, anderson, patience)
    if newton and interacting and state.best[0] > tol:
        for start in (state.best[1], u0):
            nu, nh, nc, nres = _newton_polish(start, Vg, theta, G, cv, tol)
            state.offer(nu, nh, nc, nres)
            if nres <= tol:
                break
        if state.best[0] > tol and theta > 10.0:
            warm = solve_thermal(V, spec, grid, theta / 4.0, tau=tau, max_iter=max_iter, tol=tol,
                                 anderson=anderson, newton=True, patience=patience, warn=False)
            state.iterations += warm.iterations
            nu, nh, nc, nres = _newton_polish(warm.log_density, Vg, theta, G, cv, tol)
            state.offer(nu, nh, nc, nres)
        if state.best[0] > tol and state.iterations < max_iter:
            state.restart_from_best()
            _damped_iterations(state, Vg, theta, cv, potential, tol, max_iter - state.iterations,
                               anderson, patience)
    res, u, h, c = state.best
    converged = res <= tol
    if not converged and warn:
        warnings.warn(f"thermal iteration stopped at residual {res:.3e} (tol {tol:g}); "
                      "try a smaller damping tau", RuntimeWarning, stacklevel=2)
    dens = DensityMeasure(grid, _density_from_log(u), mass_tol=1e-8)
    return ThermalSolution(dens, u, c, float(theta), res, state.iterations, converged, h, tol, state.tau,
                           state.trace)


class _DampedState:
    def __init__(self, u, h, c, res, tau):
        self.u, self.h, self.c, self.res, self.tau = u, h, c, res, tau
        self.best = (res, u, h, c)
        self.trace = [res]
        self.iterations = 0

    def offer(self, u, h, c, res) -> bool:
        self.trace.append(res)
        if res < self.best[0]:
            self.best = (res, u, h, c)
            return True
        return False

    def restart_from_best(self):
        self.res, self.u, self.h, self.c = self.best


def _damped_iterations(st: _DampedState, Vg, theta, cv, potential, tol, n_iter, anderson, patience):
    shape = st.u.shape
    hist_u, hist_f = [], []
    since_best = 0
    for _ in range(n_iter):
        if st.res <= tol:
            return
        st.iterations += 1
        g_u = (1 - st.tau) * st.u + st.tau * _normalize_log(-theta * (2 * st.h + Vg), cv)
        f = g_u - st.u
        u_next = g_u
        if anderson > 0:
            hist_u.append(g_u)
            hist_f.append(f)
            if len(hist_u) > anderson + 1:
                hist_u.pop(0)
                hist_f.pop(0)
            if len(hist_f) >= 2:
                dF = np.stack([(hist_f[k + 1] - hist_f[k]).ravel() for k in range(len(hist_f) - 1)], axis=1)
                dG = np.stack([(hist_u[k + 1] - hist_u[k]).ravel() for k in range(len(hist_u) - 1)], axis=1)
                gam, *_ = np.linalg.lstsq(dF, f.ravel(), rcond=None)
                u_next = g_u - (dG @ gam).reshape(shape)
        u_next = _normalize_log(u_next, cv)
        h_next = potential(u_next)
        c_next, res_next = thermal_residual(u_next, h_next, Vg, theta, cv)
        if not np.isfinite(res_next) or res_next > 1e3 * st.best[0]:
            # acceleration blew up: fall back to the plain damped step
            hist_u.clear()
            hist_f.clear()
            u_next = _normalize_log(g_u, cv)
            h_next = potential(u_next)
            c_next, res_next = thermal_residual(u_next, h_next, Vg, theta, cv)
        improved = res_next < st.best[0] * (1 - 1e-3)
        st.u, st.h, st.c, st.res = u_next, h_next, c_next, res_next
        st.offer(u_next, h_next, c_next, res_next)
        since_best = 0 if improved else since_best + 1
        if since_best >= patience:
            # oscillation: residual has not decreased for `patience` iterations
            st.tau *= 0.5
            hist_u.clear()
            hist_f.clear()
            since_best = 0
            st.restart_from_best()
            if st.tau < 1e-8:
                return


def _newton_polish(u, Vg, theta, G, cv, tol, max_newton: int = 30):
    """Newton-Krylov on ``F(u, c) = (2h + V + u/theta - c, sum e^u h^d - 1)``."""
    from scipy.sparse.linalg import LinearOperator, minres

    shape = u.shape
    size = u.size
    h = G(np.exp(u) * cv)
    c, res = thermal_residual(u, h, Vg, theta, cv)
    for _ in range(max_newton):
        if res <= tol:
            break
        m = np.exp(u) * cv
        F1 = 2 * h + Vg + u / theta - c
        F2 = float(np.sum(m) - 1.0)
        sq = np.sqrt(np.maximum(m, 1e-250))
        S = LinearOperator((size, size), dtype=float,
                           matvec=lambda z: (2 * sq * G(sq * z.reshape(shape)) + z.reshape(shape) / theta).ravel())

        def jinv(r):
            z, _ = minres(S, (sq * r).ravel(), rtol=1e-12, maxiter=400)
            return z.reshape(shape) / sq

        a = jinv(F1)
        b = jinv(np.ones(shape))
        dc = (float(np.sum(m * a)) - F2) / float(np.sum(m * b))
        du = -a + dc * b
        norm0 = float(np.linalg.norm(F1)) + abs(F2)
        alpha, accepted = 1.0, False
        while alpha > 1e-4:
            u_t = _normalize_log(u + alpha * du, cv)
            h_t = G(np.exp(u_t) * cv)
            c_t, res_t = thermal_residual(u_t, h_t, Vg, theta, cv)
            norm_t = float(np.linalg.norm(2 * h_t + Vg + u_t / theta - c_t))
            if np.isfinite(norm_t) and norm_t < (1 - 1e-4 * alpha) * norm0:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        u, h, c, res = u_t, h_t, c_t, res_t
    return u, h, c, res


# ---------------------------------------------------------------------------
# structural checks


def zeta(solution, V) -> np.ndarray:
    """Confinement function: ``2h + V - c`` (equilibrium) or ``-(1/theta) log mu`` (thermal)."""
    if not solution.converged:
        raise NotConvergedError("solution did not converge; refusing to build the confinement function")
    if isinstance(solution, ThermalSolution):
        return -solution.log_density / solution.theta
    Vg = as_grid_potential(V, solution.density.grid)
    return 2 * solution.potential + Vg - solution.c


@dataclass
class ThermalBoundsReport:
    thetas: list
    sup_values: list
    C: float
    sup_spread: float
    level: float
    omega_mask: np.ndarray
    tail_max: list
    violations: int
    omega_interior: bool
    passed: bool

    def to_dict(self) -> dict:
        return {"thetas": self.thetas, "sup_values": self.sup_values, "C": self.C,
                "sup_spread": self.sup_spread, "level": self.level, "tail_max": self.tail_max,
                "violations": self.violations, "omega_interior": self.omega_interior, "passed": self.passed}


def check_thermal_bounds(solutions: list, V, sup_spread_tol: float = 0.5) -> ThermalBoundsReport:
    """Fit one ``C`` with ``sup mu_theta <= e^C`` and ``log mu_theta <= C - theta (V - v*)`` off ``Omega``.

    The tail statement changes under ``V -> V + const`` while ``mu_theta``
    does not, so ``V`` is measured from the level ``v* = max over theta and
    the grid of (c_theta - 2 h_theta)`` and ``Omega = {V <= v*}``. The
    report passes when there are no violations, ``Omega`` stays clear of the
    box boundary and ``sup mu_theta`` varies by less than ``sup_spread_tol``.
    """
    if len(solutions) < 2:
        raise ValueError("need at least two thermal solutions")
    grid = solutions[0].density.grid
    Vg = as_grid_potential(V, grid)
    thetas = [s.theta for s in solutions]
    sups = [float(np.exp(s.log_density.max())) for s in solutions]
    v_star = max(float(np.max(s.c - 2 * s.potential)) for s in solutions)
    omega = Vg <= v_star
    off = ~omega
    tails = [float(np.max(s.log_density[off] + s.theta * (Vg[off] - v_star))) if np.any(off) else -np.inf
             for s in solutions]
    C = max(float(np.log(max(sups))), max(tails))
    violations = 0
    for s in solutions:
        violations += int(np.sum(s.log_density > C + 1e-12))
        if np.any(off):
            violations += int(np.sum(s.log_density[off] + s.theta * (Vg[off] - v_star) > C + 1e-12))
    spread = (max(sups) - min(sups)) / min(sups)
    interior = bool(not np.any(omega & grid.boundary_mask()))
    passed = violations == 0 and spread < sup_spread_tol and np.isfinite(C) and interior
    return ThermalBoundsReport(thetas, sups, float(C), float(spread), v_star, omega, tails, violations,
                               interior, bool(passed))


def thermal_convergence_rate(thetas, V, spec: KernelSpec, grid: Grid, alpha: float, mode: str = "full",
                             equilibrium: EquilibriumSolution | None = None, top_k: int | None = None,
                             thermal_kwargs: dict | None = None, eq_kwargs: dict | None = None) -> list:
    """Rows ``(theta, ||mu_inf - mu_theta||^2, theta * ||.||^2)`` in the dual Hölder norm.

    Solves sequentially with warm starts in increasing ``theta``; duplicated
    ``theta`` values reuse the same solution and give identical rows.
    """
    from .norms import holder_dual

    if equilibrium is None:
        equilibrium = solve_equilibrium(V, spec, grid, **(eq_kwargs or {}))
    cache: dict = {}
    warm = None
    for th in sorted(set(float(t) for t in thetas)):
        sol = solve_thermal(V, spec, grid, th, init_log_density=warm, **(thermal_kwargs or {}))
        warm = sol.log_density
        diff = quantize(equilibrium.density - sol.density).dropped_zeros(1e-15)
        if top_k is not None and diff.n > top_k:
            order = np.argsort(-np.abs(diff.weights), kind="stable")[:top_k]
            order = np.sort(order)
            from .measures import SignedDiscreteMeasure

            diff = SignedDiscreteMeasure(diff.support[order], diff.weights[order], validate=False)
        res = holder_dual(diff, alpha, mode)
        cache[th] = {"theta": th, "norm_sq": res.value ** 2, "product": th * res.value ** 2,
                     "entropy": entropy(sol.density), "residual": sol.fixed_point_residual,
                     "converged": sol.converged}
    return [dict(cache[float(t)]) for t in thetas]
