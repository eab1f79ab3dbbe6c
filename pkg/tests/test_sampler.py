import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rieszgas.grid import Grid
from rieszgas.kernels import eval_kernel, riesz
from rieszgas.measures import DensityMeasure, ParticleConfiguration
from rieszgas.potentials import Potential
from rieszgas.sampler import (SamplerConfig, chain_rng, discrete_metropolis_matrix, fluctuation, gibbs_sample,
                              log_mgf_estimate, mann_kendall, run_chains, run_discrete_chain, tail_probability,
                              wilson_interval)

QUAD = Potential()


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(N=0, beta=1.0)
    with pytest.raises(ValueError):
        SamplerConfig(N=4, beta=-1.0)
    with pytest.raises(ValueError):
        SamplerConfig(N=4, beta=1.0, step_size=0.0)
    with pytest.raises(ValueError):
        SamplerConfig(N=4, beta=1.0, seed=2 ** 64)


def test_beta_zero_marginal_uniform():
    cfg = SamplerConfig(N=8, beta=0.0, n_steps=4000, burn_in=100, thinning=20, box=(-1.0, 1.0), seed=3)
    out = gibbs_sample(riesz(1, 0.25), QUAD, cfg)
    x = np.concatenate([c.points[:, 0] for c in out.configurations])
    counts, _ = np.histogram(x, bins=10, range=(-1, 1))
    n = x.size
    sigma = math.sqrt(n * 0.1 * 0.9)
    assert np.all(np.abs(counts - 0.1 * n) <= 3 * sigma)


def test_discrete_toy_matches_enumeration():
    # two particles on three sites; states are ordered pairs of distinct sites
    sites = np.array([-1.0, 0.0, 1.0])
    spec = riesz(1, 0.25)
    states = [(i, j) for i in range(3) for j in range(3) if i != j]
    E = np.array([2 * eval_kernel(spec, [sites[i] - sites[j]]) + 2 * (QUAD(sites[[i]]) + QUAD(sites[[j]])).item()
                  for i, j in states])
    beta = 0.7
    pi = np.exp(-beta * (E - E.min()))
    pi /= pi.sum()
    freqs = np.array([run_discrete_chain(E, beta, 20000, seed=k) / 20000 for k in range(20)])
    se = freqs.std(axis=0, ddof=1) / math.sqrt(len(freqs))
    assert np.all(np.abs(freqs.mean(axis=0) - pi) <= 3 * se)


def test_detailed_balance_three_states():
    E = np.array([0.0, 0.8, -0.3])
    beta = 1.7
    P = discrete_metropolis_matrix(E, beta)
    pi = np.exp(-beta * E)
    pi /= pi.sum()
    flux = pi[:, None] * P
    assert np.max(np.abs(flux - flux.T)) <= 1e-12
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-15)


def test_two_particle_chain_matches_quadrature():
    spec = riesz(1, 0.25)
    beta = 1.0
    cfg = SamplerConfig(N=2, beta=beta, n_steps=40000, burn_in=500, thinning=5, box=(-1.0, 1.0), seed=9)
    out = gibbs_sample(spec, QUAD, cfg)
    gap = np.array([abs(c.points[0, 0] - c.points[1, 0]) for c in out.configurations])
    # exact law of |x - y| on the box by quadrature of exp(-beta H)
    m = 800
    u = -1 + (np.arange(m) + 0.5) * 2 / m
    x, y = np.meshgrid(u, u, indexing="ij")
    diff = x - y
    with np.errstate(divide="ignore"):
        g = np.where(diff == 0, np.inf, eval_kernel(spec, np.where(diff == 0, 1.0, diff)[..., None]))
    H = 2 * g + 2 * (QUAD(x[..., None]) + QUAD(y[..., None]))
    w = np.exp(-beta * (H - H[np.isfinite(H)].min()))
    edges = np.linspace(0, 2, 6)
    exact = np.histogram(np.abs(diff).ravel(), bins=edges, weights=w.ravel())[0]
    exact /= exact.sum()
    batches = np.array_split(gap, 40)
    freq = np.array([np.histogram(b, bins=edges)[0] / len(b) for b in batches])
    se = freq.std(axis=0, ddof=1) / math.sqrt(len(batches))
    assert np.all(np.abs(freq.mean(axis=0) - exact) <= 3 * se + 1e-3)


def test_same_seed_bitwise_identical():
    cfg = SamplerConfig(N=10, beta=2.0, n_steps=300, burn_in=50, thinning=10, seed=123, chain_id=4)
    a = gibbs_sample(riesz(2, 0.5), QUAD, cfg)
    b = gibbs_sample(riesz(2, 0.5), QUAD, cfg)
    assert np.stack([c.points for c in a.configurations]).tobytes() == \
        np.stack([c.points for c in b.configurations]).tobytes()
    assert a.energy_trace.tobytes() == b.energy_trace.tobytes()
    assert a.acceptance_rate == b.acceptance_rate


def test_chain_streams_differ():
    cfg = SamplerConfig(N=6, beta=1.0, n_steps=50, burn_in=10, thinning=10, seed=1)
    outs = run_chains(riesz(1, 0.25), QUAD, cfg, 2)
    assert [o.chain_id for o in outs] == [0, 1]
    assert not np.array_equal(outs[0].configurations[-1].points, outs[1].configurations[-1].points)
    assert chain_rng(1, 0).random() != chain_rng(1, 1).random()


def test_chain_output_invariants():
    cfg = SamplerConfig(N=16, beta=4.0, n_steps=400, burn_in=100, thinning=10, seed=5)
    out = gibbs_sample(riesz(2, 0.5), QUAD, cfg)
    assert 0 <= out.acceptance_rate <= 1
    assert len(out.configurations) == 40
    for c in out.configurations:
        assert len(np.unique(c.points, axis=0)) == c.N
    assert out.drift < 1e-8


def test_energy_trace_no_drift_at_stationarity():
    cfg = SamplerConfig(N=16, beta=2.0, n_steps=4000, burn_in=1000, thinning=10, seed=21)
    out = gibbs_sample(riesz(1, 0.25), QUAD, cfg)
    trace = out.energy_trace
    _, _, p = mann_kendall(trace[trace.size // 2:], batches=20)
    assert p > 0.05


def test_mann_kendall_detects_trend():
    r = np.random.default_rng(0)
    x = np.linspace(0, 1, 200) + 0.1 * r.normal(size=200)
    s, z, p = mann_kendall(x)
    assert s > 0 and z > 0 and p < 1e-6
    assert mann_kendall(np.ones(10))[2] == 1.0


# ---------------------------------------------------------------------------
# fluctuations


def uniform_square(n=64):
    grid = Grid.cube(2, 0.5, n, center=0.5)
    return DensityMeasure(grid, np.ones(grid.shape))


def test_fluctuation_constant_is_zero():
    mu = uniform_square()
    X = ParticleConfiguration(np.random.default_rng(0).random((30, 2)))
    assert fluctuation(np.full(mu.grid.shape, 4.2), X, mu) == pytest.approx(0.0, abs=1e-13)
    assert fluctuation(lambda x: np.full(x.shape[:-1], -1.5), X, mu) == pytest.approx(0.0, abs=1e-13)


def test_fluctuation_iid_mean_zero():
    mu = uniform_square()
    f = lambda x: np.sin(3 * x[..., 0]) + x[..., 1] ** 2  # noqa: E731
    r = np.random.default_rng(7)
    vals = np.array([fluctuation(f, ParticleConfiguration(r.random((20, 2))), mu) for _ in range(1000)])
    assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / math.sqrt(vals.size)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_fluctuation_linear(a, b):
    mu = uniform_square(32)
    X = ParticleConfiguration(np.random.default_rng(1).random((12, 2)))
    f = mu.grid.evaluate(lambda x: np.cos(2 * x[..., 0]))
    g = mu.grid.evaluate(lambda x: x[..., 0] * x[..., 1])
    lhs = fluctuation(a * f + b * g, X, mu)
    rhs = a * fluctuation(f, X, mu) + b * fluctuation(g, X, mu)
    assert lhs == pytest.approx(rhs, abs=1e-12)


# ---------------------------------------------------------------------------
# Laplace transform and tails


def test_log_mgf_zero_t_and_constant():
    F = np.random.default_rng(0).normal(size=500)
    assert log_mgf_estimate(F, 100.0, 0.0).value == 0.0
    for t in (0.1, 1.0, 5.0):
        assert log_mgf_estimate(np.zeros(500), 100.0, t).value == pytest.approx(0.0, abs=1e-12)


def test_log_mgf_convex_in_t():
    F = np.random.default_rng(1).normal(size=400) * 0.01
    ts = np.linspace(0, 2, 21)
    vals = np.array([log_mgf_estimate(F, 256.0, t, n_boot=20).value for t in ts])
    assert np.all(np.diff(vals, 2) >= -1e-12)
    assert np.all(np.diff(vals) >= -1e-12)


def test_log_mgf_flags_dominated_estimate():
    F = np.r_[np.zeros(999), 1.0]
    est = log_mgf_estimate(F, 1000.0, 1.0, n_boot=10)
    assert est.unreliable and est.ess_fraction < 0.01
    assert log_mgf_estimate(np.zeros(50), 1.0, 1.0, n_boot=10).unreliable


def test_tail_probability_edges():
    x = np.random.default_rng(2).normal(size=200)
    assert tail_probability(x, x.min() - 1).p_hat == 1.0
    top = tail_probability(x, x.max() + 1)
    assert top.p_hat == 0.0 and top.hi > 0


def test_tail_probability_exponential():
    x = np.random.default_rng(3).exponential(size=5000)
    for r in (0.1, 0.5, 1.0, 2.0, 3.0):
        est = tail_probability(x, r)
        assert est.lo <= math.exp(-r) <= est.hi


def test_wilson_interval_contains_estimate():
    for k, n in [(0, 10), (3, 10), (10, 10), (50, 1000)]:
        lo, hi = wilson_interval(k, n)
        assert 0 <= lo <= k / n <= hi <= 1
