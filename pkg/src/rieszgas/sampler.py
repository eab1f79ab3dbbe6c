"""Metropolis-Hastings sampling of the Gibbs measure ``exp(-beta H_N)`` and fluctuation statistics.

Random numbers come from a Philox generator seeded by ``SeedSequence([seed,
chain_id])`` and are drawn in fixed blocks outside the compiled kernel, so a
chain is bit-reproducible from its seed regardless of block timing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from .energy import hamiltonian
from .grid import Grid, interpolate
from .kernels import KernelSpec
from .measures import DensityMeasure, ParticleConfiguration
from .potentials import Potential

TARGET_ACCEPTANCE = 0.35
RECOMPUTE_EVERY = 10_000

# kernel codes for the compiled path; power kernels are c * r^e with e = 2s - d
_K_NONE, _K_POWER, _K_LOG = 0, 1, 2


@dataclass
class SamplerConfig:
    N: int
    beta: float
    step_size: float = 0.1
    n_steps: int = 1000
    burn_in: int = 200
    thinning: int = 10
    seed: int = 0
    proposal: str = "random-walk"
    box: tuple | None = None
    chain_id: int = 0
    tune: bool = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.proposal not in ("random-walk", "langevin"):
            raise ValueError(f"unknown proposal {self.proposal!r}")
        if self.thinning < 1 or self.n_steps < 0 or self.burn_in < 0:
            raise ValueError("n_steps, burn_in must be >= 0 and thinning >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class ChainOutput:
    configurations: list
    acceptance_rate: float
    energy_trace: np.ndarray
    seed: int
    chain_id: int
    step_size: float
    burn_in_acceptance: float = float("nan")
    drift: float = 0.0

    def to_dict(self) -> dict:
        return {"seed": self.seed, "chain_id": self.chain_id, "acceptance_rate": self.acceptance_rate,
                "step_size": self.step_size, "n_samples": len(self.configurations)}


def chain_rng(seed: int, chain_id: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chain_id)])))


# ---------------------------------------------------------------------------
# compiled single-particle moves


@numba.njit(cache=True)
def _g(code, c, e, r2):
    if code == _K_POWER:
        return c * r2 ** (0.5 * e)
    if code == _K_LOG:
        return -0.5 * c * math.log(r2)
    return 0.0


@numba.njit(cache=True)
def _grad_g_coef(code, c, e, r2):
    # grad g(z) = coef * z
    if code == _K_POWER:
        return c * e * r2 ** (0.5 * e - 1.0)
    if code == _K_LOG:
        return -c / r2
    return 0.0


@numba.njit(cache=True)
def _V(y, vc, vp, center, vs):
    r2 = 0.0
    for k in range(y.shape[0]):
        r2 += (y[k] - center[k]) ** 2
    return vc * r2 ** (0.5 * vp) + vs


@numba.njit(cache=True)
def _grad_log_target(X, i, y, beta, N, code, c, e, vc, vp, center, out):
    d = X.shape[1]
    for k in range(d):
        out[k] = 0.0
    for j in range(N):
        if j == i:
            continue
        r2 = 0.0
        for k in range(d):
            r2 += (y[k] - X[j, k]) ** 2
        if r2 == 0.0:
            continue
        a = _grad_g_coef(code, c, e, r2)
        for k in range(d):
            out[k] += 2.0 * a * (y[k] - X[j, k])
    r2 = 0.0
    for k in range(d):
        r2 += (y[k] - center[k]) ** 2
    gv = vc * vp * r2 ** (0.5 * vp - 1.0) if r2 > 0 else 0.0
    for k in range(d):
        out[k] = -beta * (out[k] + N * gv * (y[k] - center[k]))


@numba.njit(cache=True)
def _run_moves(X, idx, noise, unif, step, beta, code, c, e, vc, vp, center, vs,
               lo, hi, has_box, langevin):
    N, d = X.shape
    y = np.empty(d)
    gx = np.empty(d)
    gy = np.empty(d)
    accepted = 0
    dH_total = 0.0
    for m in range(idx.shape[0]):
        i = idx[m]
        if langevin:
            _grad_log_target(X, i, X[i], beta, N, code, c, e, vc, vp, center, gx)
            for k in range(d):
                y[k] = X[i, k] + 0.5 * step * step * gx[k] + step * noise[m, k]
        else:
            for k in range(d):
                y[k] = X[i, k] + step * noise[m, k]
        inside = True
        if has_box:
            for k in range(d):
                if y[k] < lo[k] or y[k] > hi[k]:
                    inside = False
        if not inside:
            continue
        dH = 0.0
        coincident = False
        for j in range(N):
            if j == i:
                continue
            ry = 0.0
            rx = 0.0
            for k in range(d):
                ry += (y[k] - X[j, k]) ** 2
                rx += (X[i, k] - X[j, k]) ** 2
            if ry == 0.0:
                coincident = True
                break
            dH += 2.0 * (_g(code, c, e, ry) - _g(code, c, e, rx))
        if coincident:
            continue
        dH += N * (_V(y, vc, vp, center, vs) - _V(X[i], vc, vp, center, vs))
        log_a = -beta * dH
        if langevin:
            _grad_log_target(X, i, y, beta, N, code, c, e, vc, vp, center, gy)
            fwd = 0.0
            bwd = 0.0
            for k in range(d):
                fwd += (y[k] - X[i, k] - 0.5 * step * step * gx[k]) ** 2
                bwd += (X[i, k] - y[k] - 0.5 * step * step * gy[k]) ** 2
            log_a += (fwd - bwd) / (2.0 * step * step)
        if log_a >= 0.0 or unif[m] < math.exp(log_a):
            for k in range(d):
                X[i, k] = y[k]
            accepted += 1
            dH_total += dH
    return accepted, dH_total


def _run_moves_python(X, idx, noise, unif, step, beta, spec, V, lo, hi, has_box):
    """Reference path for custom kernels or potentials (random-walk only)."""
    N, d = X.shape
    accepted, dH_total = 0, 0.0
    for m in range(idx.shape[0]):
        i = idx[m]
        y = X[i] + step * noise[m]
        if has_box and (np.any(y < lo) or np.any(y > hi)):
            continue
        others = np.delete(X, i, axis=0)
        if np.any(np.all(others == y, axis=1)):
            continue
        if N > 1 and spec.family != "none":
            dH = 2.0 * float(np.sum(spec.g(y - others)) - np.sum(spec.g(X[i] - others)))
        else:
            dH = 0.0
        dH += N * float(V(y[None])[0] - V(X[i][None])[0])
        log_a = -beta * dH
        if log_a >= 0 or unif[m] < math.exp(log_a):
            X[i] = y
            accepted += 1
            dH_total += dH
    return accepted, dH_total


def _compiled_params(spec: KernelSpec, V):
    if spec.family == "none":
        code, c, e = _K_NONE, 0.0, 0.0
    elif spec.is_log:
        code, c, e = _K_LOG, spec.c, 0.0
    elif spec.builtin:
        code, c, e = _K_POWER, spec.c, spec.exponent
    else:
        return None
    if not (isinstance(V, Potential) and V.kind == "power"):
        return None
    center = np.zeros(spec.d) if not V.center else np.asarray(V.center, float)
    return code, float(c), float(e), float(V.coef), float(V.power), center, float(V.shift)


# ---------------------------------------------------------------------------
# initial draw


def initial_configuration(V, cfg: SamplerConfig, d: int, rng: np.random.Generator,
                          grid: Grid | None = None) -> np.ndarray:
    """I.i.d. points from ``exp(-beta N V)`` normalized (uniform on the box when ``beta = 0``)."""
    N, beta = cfg.N, cfg.beta
    lo = hi = None
    if cfg.box is not None:
        lo, hi = (np.broadcast_to(np.asarray(v, float), (d,)) for v in cfg.box)
    if beta == 0:
        if lo is None:
            raise ValueError("beta = 0 needs a bounded box")
        return lo + (hi - lo) * rng.random((N, d))
    if isinstance(V, Potential) and V.kind == "power" and V.coef > 0 and V.power > 0:
        # radial law: r^p ~ Gamma(d/p, 1/(beta N coef)), direction uniform
        center = np.zeros(d) if not V.center else np.asarray(V.center, float)
        out = np.empty((N, d))
        filled = 0
        while filled < N:
            k = N - filled
            r = rng.gamma(d / V.power, 1.0 / (beta * N * V.coef), size=k) ** (1.0 / V.power)
            u = rng.standard_normal((k, d))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            pts = center + r[:, None] * u
            if lo is not None:
                pts = pts[np.all((pts >= lo) & (pts <= hi), axis=1)]
            out[filled:filled + len(pts)] = pts
            filled += len(pts)
        return out
    if grid is None:
        if lo is None:
            raise ValueError("a general potential needs a grid or a box for the initial draw")
        grid = Grid(d, tuple(lo), tuple(hi), 256 if d == 1 else (64 if d == 2 else 16))
    logw = -beta * N * grid.evaluate(V).ravel()
    p = np.exp(logw - logsumexp(logw))
    cells = rng.choice(p.size, size=N, p=p)
    idx = np.stack(np.unravel_index(cells, grid.shape), axis=1)
    return np.asarray(grid.lo) + (idx + rng.random((N, d))) * grid.h


# ---------------------------------------------------------------------------
# driver


def gibbs_sample(spec: KernelSpec, V, cfg: SamplerConfig, init: np.ndarray | None = None,
                 grid: Grid | None = None) -> ChainOutput:
    """Single-particle Metropolis-Hastings chain targeting ``exp(-beta H_N)``.

    ``n_steps``, ``burn_in`` and ``thinning`` count sweeps of ``N`` moves.
    During burn-in the step size is adapted toward 35% acceptance, then
    frozen. ``H_N`` is tracked incrementally and recomputed from scratch every
    ``10^4`` moves; ``drift`` reports the largest correction seen.
    """
    d = spec.d
    rng = chain_rng(cfg.seed, cfg.chain_id)
    X = np.array(init, float) if init is not None else initial_configuration(V, cfg, d, rng, grid)
    if X.shape != (cfg.N, d):
        raise ValueError(f"initial configuration must have shape ({cfg.N}, {d})")
    has_box = cfg.box is not None
    if has_box:
        lo, hi = (np.ascontiguousarray(np.broadcast_to(np.asarray(v, float), (d,))) for v in cfg.box)
    else:
        lo, hi = np.zeros(d), np.zeros(d)
    params = _compiled_params(spec, V)
    if cfg.proposal == "langevin" and params is None:
        raise NotImplementedError("Langevin proposals need a built-in kernel and a power potential")
    Vcall = V if callable(V) else None
    if Vcall is None:
        raise TypeError("potential must be callable")

    def full_energy():
        return hamiltonian(ParticleConfiguration(X, validate=False), Vcall, spec)

    H = full_energy()
    step = float(cfg.step_size)
    N = cfg.N
    moves_per_sweep = N
    total_sweeps = cfg.burn_in + cfg.n_steps
    block_sweeps = max(1, min(RECOMPUTE_EVERY // max(N, 1), 50))
    configs, energies = [], []
    accepted_run, proposed_run = 0, 0
    accepted_burn, proposed_burn = 0, 0
    drift = 0.0
    sweep = 0
    moves_since_recompute = 0
    while sweep < total_sweeps:
        nb = min(block_sweeps, total_sweeps - sweep)
        if sweep < cfg.burn_in:
            nb = min(nb, cfg.burn_in - sweep)
        elif cfg.thinning > 0:
            to_record = cfg.thinning - ((sweep - cfg.burn_in) % cfg.thinning)
            nb = min(nb, to_record)
        nmoves = nb * moves_per_sweep
        idx = rng.integers(0, N, size=nmoves)
        noise = rng.standard_normal((nmoves, d))
        unif = rng.random(nmoves)
        if params is not None:
            code, c, e, vc, vp, center, vs = params
            acc, dH = _run_moves(X, idx, noise, unif, step, cfg.beta, code, c, e, vc, vp, center, vs,
                                 lo, hi, has_box, cfg.proposal == "langevin")
        else:
            acc, dH = _run_moves_python(X, idx, noise, unif, step, cfg.beta, spec, Vcall, lo, hi, has_box)
        H += dH
        moves_since_recompute += nmoves
        if moves_since_recompute >= RECOMPUTE_EVERY:
            exact = full_energy()
            drift = max(drift, abs(exact - H) / max(abs(exact), 1.0))
            H = exact
            moves_since_recompute = 0
        if sweep < cfg.burn_in:
            accepted_burn += acc
            proposed_burn += nmoves
            if cfg.tune:
                rate = acc / nmoves
                step *= math.exp(rate - TARGET_ACCEPTANCE)
        else:
            accepted_run += acc
            proposed_run += nmoves
        sweep += nb
        if sweep > cfg.burn_in and (sweep - cfg.burn_in) % cfg.thinning == 0:
            configs.append(ParticleConfiguration(X.copy(), validate=False))
            energies.append(H)
    rate = accepted_run / proposed_run if proposed_run else float("nan")
    burn_rate = accepted_burn / proposed_burn if proposed_burn else float("nan")
    return ChainOutput(configs, float(rate), np.asarray(energies), int(cfg.seed), int(cfg.chain_id), step,
                       float(burn_rate), float(drift))


def run_chains(spec: KernelSpec, V, cfg: SamplerConfig, n_chains: int, grid: Grid | None = None) -> list:
    """Independent chains ``chain_id = 0..n_chains-1``, merged in chain order."""
    from dataclasses import replace

    return [gibbs_sample(spec, V, replace(cfg, chain_id=k), grid=grid) for k in range(n_chains)]


# ---------------------------------------------------------------------------
# discrete toy chains (exact enumeration oracles)


def discrete_metropolis_matrix(energies: np.ndarray, beta: float, proposal: np.ndarray | None = None) -> np.ndarray:
    """Transition matrix of Metropolis on a finite state space with a symmetric proposal."""
    E = np.asarray(energies, float)
    n = E.size
    Q = np.full((n, n), 1.0 / (n - 1)) if proposal is None else np.asarray(proposal, float)
    np.fill_diagonal(Q, 0.0)
    P = Q * np.minimum(1.0, np.exp(-beta * (E[None, :] - E[:, None])))
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P


def run_discrete_chain(energies: np.ndarray, beta: float, n_steps: int, seed: int = 0, start: int = 0) -> np.ndarray:
    """Visit counts of a Metropolis chain with the uniform proposal over the other states."""
    E = np.asarray(energies, float)
    n = E.size
    rng = chain_rng(seed)
    props = rng.integers(0, n - 1, size=n_steps)
    u = rng.random(n_steps)
    counts = np.zeros(n, dtype=np.int64)
    x = start
    for k in range(n_steps):
        y = props[k] + (props[k] >= x)
        if u[k] < math.exp(min(0.0, -beta * (E[y] - E[x]))):
            x = y
        counts[x] += 1
    return counts


# ---------------------------------------------------------------------------
# statistics


def fluctuation(f, X: ParticleConfiguration, mu: DensityMeasure) -> float:
    """``(1/N) sum f(x_i) - int f dmu``; ``f`` a grid array on ``mu``'s grid or a callable."""
    grid = mu.grid
    if callable(f):
        fx = np.asarray(f(X.points), float)
        fg = grid.evaluate(f)
    else:
        fg = np.asarray(f, float)
        fx = interpolate(grid, fg, X.points)
    return float(np.mean(fx) - mu.integrate(fg))


@dataclass
class MGFEstimate:
    t: float
    value: float
    ci_width: float
    ess_fraction: float
    unreliable: bool


def log_mgf_estimate(fluct: np.ndarray, scale: float, t: float, n_boot: int = 200, seed: int = 0,
                     min_samples: int = 100) -> MGFEstimate:
    """``log mean exp(scale |t F|)`` with a max shift, plus a bootstrap 95% width.

    ``unreliable`` flags fewer than ``min_samples`` samples or an effective
    sample fraction of the exponential weights below 1%.
    """
    F = np.asarray(fluct, float)
    n = F.size
    if t == 0:
        return MGFEstimate(0.0, 0.0, 0.0, 1.0, n < min_samples)
    a = scale * np.abs(t * F)
    val = float(logsumexp(a) - math.log(n))
    w = np.exp(a - a.max())
    ess = float(w.sum() ** 2 / np.sum(w * w)) / n
    rng = chain_rng(seed, 1)
    boots = np.array([logsumexp(a[rng.integers(0, n, n)]) - math.log(n) for _ in range(n_boot)])
    width = float(np.quantile(boots, 0.975) - np.quantile(boots, 0.025))
    return MGFEstimate(float(t), val, width, ess, bool(n < min_samples or ess < 0.01))


@dataclass
class TailEstimate:
    r: float
    p_hat: float
    lo: float
    hi: float
    n: int


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # the end points are exact at k = 0 and k = n
    return (0.0 if k == 0 else max(0.0, mid - half)), (1.0 if k == n else min(1.0, mid + half))


def tail_probability(samples: np.ndarray, r: float, confidence: float = 0.95) -> TailEstimate:
    """Exceedance frequency ``#{x > r} / n`` with a Wilson score interval."""
    x = np.asarray(samples, float)
    k = int(np.sum(x > r))
    z = float(norm.ppf(0.5 + confidence / 2))
    lo, hi = wilson_interval(k, x.size, z)
    return TailEstimate(float(r), k / x.size, lo, hi, int(x.size))


def mann_kendall(x: np.ndarray, batches: int | None = None) -> tuple:
    """Mann-Kendall trend statistic ``(S, z, two-sided p)`` (no tie correction).

    The test assumes independent values. For an autocorrelated trace pass
    ``batches``: the test then runs on that many consecutive batch means.
    """
    x = np.asarray(x, float)
    if batches is not None and x.size > batches:
        x = np.array([b.mean() for b in np.array_split(x, batches)])
    n = x.size
    s = float(np.sum(np.sign(x[None, :] - x[:, None])[np.triu_indices(n, 1)]))
    var = n * (n - 1) * (2 * n + 5) / 18.0
    z = 0.0 if s == 0 else (s - math.copysign(1.0, s)) / math.sqrt(var)
    return s, z, float(2 * norm.sf(abs(z)))
