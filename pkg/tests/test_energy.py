import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rieszgas.energy import (f_n, free_energy, hamiltonian, interaction_energy, mean_field_energy, pair_sum,
                             verify_splitting)
from rieszgas.equilibrium import solve_equilibrium, solve_thermal
from rieszgas.grid import Grid, interpolate
from rieszgas.kernels import coulomb, eval_kernel, riesz, riesz_constant
from rieszgas.measures import (DensityMeasure, ParticleConfiguration, SignedDiscreteMeasure, empirical_measure,
                               entropy, potential_field, smear_ball)
from rieszgas.potentials import Potential

QUAD = Potential()


def const(c):
    return lambda x: np.full(np.shape(x)[:-1], float(c))


def bump(center, width):
    c = np.asarray(center, float)
    return lambda x: np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * width ** 2))


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.15, 0.4), st.floats(0.15, 0.4),
       st.sampled_from(["spectral", "direct"]))
def test_difference_energy_nonnegative(c1, c2, w1, w2, method):
    grid = Grid.cube(2, 2.0, 32)
    for spec in (riesz(2, 0.5), coulomb(2)):
        mu = DensityMeasure.from_function(grid, bump([c1, 0.1], w1))
        nu = DensityMeasure.from_function(grid, bump([0.0, c2], w2))
        assert interaction_energy(mu - nu, spec, method) >= -1e-12


def test_two_far_atoms():
    spec = riesz(2, 0.5)
    nu = SignedDiscreteMeasure([[0.0, 0.0], [30.0, 40.0]], [0.5, 0.5])
    assert interaction_energy(nu, spec) == pytest.approx(0.5 * eval_kernel(spec, [30.0, 40.0]), rel=1e-14)


@pytest.mark.parametrize("spec", [riesz(1, 0.25), riesz(2, 0.5), coulomb(2)])
def test_spectral_matches_direct(spec):
    grid = Grid.cube(spec.d, 2.0, 128)
    mu = DensityMeasure.from_function(grid, bump([0.1] * spec.d, 0.3))
    nu = DensityMeasure.from_function(grid, bump([-0.2] * spec.d, 0.25))
    target = mu if spec.family == "riesz" else mu - nu
    spectral = interaction_energy(target, spec, "spectral")
    direct = interaction_energy(target, spec, "direct")
    assert abs(spectral - direct) <= 0.01 * abs(direct)


def test_uniform_interval_energy_closed_form():
    # int int |x - y|^(-1/2) over [0, 1]^2 = 8/3
    grid = Grid(1, (0.0,), (1.0,), 2048)
    mu = DensityMeasure.from_values(grid, np.ones(grid.shape))
    spec = riesz(1, 0.25)
    exact = riesz_constant(1, 0.25) * 8 / 3
    assert interaction_energy(mu, spec, "direct") == pytest.approx(exact, rel=1e-3)
    assert free_energy(mu, const(1.0), spec, theta=5.0) == pytest.approx(exact + 1.0, rel=1e-3)


def test_mean_field_potential_terms():
    grid = Grid.cube(2, 2.0, 32)
    spec = coulomb(2)
    mu = DensityMeasure.from_function(grid, bump([0, 0], 0.3))
    assert mean_field_energy(mu, const(0.0), spec) == pytest.approx(interaction_energy(mu, spec, "direct"), abs=1e-13)
    base = mean_field_energy(mu, QUAD, spec)
    assert mean_field_energy(mu, QUAD.shifted(0.7), spec) == pytest.approx(base + 0.7, abs=1e-12)


def test_free_energy_limits():
    grid = Grid.cube(1, 2.0, 256)
    spec = riesz(1, 0.25)
    mu = DensityMeasure.from_function(grid, bump([0.0], 0.4))
    for theta in (1e2, 1e4, 1e6):
        gap = free_energy(mu, QUAD, spec, theta) - mean_field_energy(mu, QUAD, spec)
        assert gap == pytest.approx(entropy(mu) / theta, rel=1e-10)


def test_equilibrium_minimal_against_perturbations(rng):
    grid = Grid.cube(1, 2.0, 256)
    spec = riesz(1, 0.25)
    sol = solve_equilibrium(QUAD, spec, grid, tol=1e-9)
    best = mean_field_energy(sol.density, QUAD, spec)
    for _ in range(20):
        pert = sol.density.values * (1 + 0.3 * rng.uniform(-1, 1, grid.shape)) + 0.05 * rng.random(grid.shape) \
            * (np.abs(grid.axes[0]) < 1.5)
        other = DensityMeasure.from_values(grid, pert)
        assert mean_field_energy(other, QUAD, spec) >= best - 1e-12


def test_single_particle_next_order():
    grid = Grid.cube(2, 2.0, 64)
    spec = riesz(2, 0.5)
    mu = DensityMeasure.from_function(grid, bump([0.2, 0], 0.3))
    x = np.array([[0.3, -0.4]])
    h = potential_field(mu, spec)
    expected = -2 * interpolate(grid, h, x)[0] + mu.integrate(h)
    assert f_n(ParticleConfiguration(x), mu, spec) == pytest.approx(expected, rel=1e-13)


@given(st.permutations(list(range(6))))
def test_next_order_permutation_invariant(perm):
    grid = Grid.cube(2, 2.0, 32)
    spec = coulomb(2)
    mu = DensityMeasure.from_function(grid, bump([0, 0], 0.4))
    pts = np.random.default_rng(3).uniform(-1, 1, (6, 2))
    a = f_n(ParticleConfiguration(pts), mu, spec)
    b = f_n(ParticleConfiguration(pts[list(perm)]), mu, spec)
    assert b == pytest.approx(a, rel=1e-12)


def test_next_order_small_smearing():
    # smearing the empirical measure over radius eta leaves only the self terms, of order eta^(2s-d)
    spec = riesz(2, 0.5)
    grid = Grid.cube(2, 2.0, 256)
    X = ParticleConfiguration([[-1.0, -0.8], [0.9, 0.3], [0.1, 1.0], [-0.5, 0.6]])
    values = []
    for eta in (0.2, 0.1):
        F = f_n(X, smear_ball(empirical_measure(X), eta, grid), spec)
        ball = smear_ball(SignedDiscreteMeasure([[0.0, 0.0]], [1.0]), eta, grid)
        h = potential_field(ball, spec, check_padding=False)
        self_term = (ball.integrate(h) - 2 * interpolate(grid, h, np.zeros((1, 2)))[0]) / X.N
        assert F < 0
        assert F == pytest.approx(self_term, rel=0.01)
        values.append(F)
    assert values[1] / values[0] == pytest.approx(2.0 ** (2 - 2 * spec.s), rel=0.05)


def test_hamiltonian_coulomb_pair_at_unit_distance():
    X = ParticleConfiguration([[0.0, 0.0], [0.6, 0.8]])
    assert hamiltonian(X, const(0.0), coulomb(2)) == pytest.approx(0.0, abs=1e-15)


@given(st.integers(1, 30), st.floats(-5, 5))
def test_hamiltonian_constant_shift(N, c):
    X = ParticleConfiguration(np.random.default_rng(N).normal(size=(N, 2)))
    spec = riesz(2, 0.5)
    base = hamiltonian(X, QUAD, spec)
    assert hamiltonian(X, QUAD.shifted(c), spec) == pytest.approx(base + N * N * c, rel=1e-12, abs=1e-9)


@given(st.floats(0.1, 10), st.sampled_from([(1, 0.25), (2, 0.5), (3, 0.75)]))
def test_pair_term_homogeneity(lam, ds):
    d, s = ds
    pts = np.random.default_rng(d).normal(size=(8, d))
    spec = riesz(d, s)
    assert pair_sum(lam * pts, spec) == pytest.approx(lam ** (2 * s - d) * pair_sum(pts, spec), rel=1e-12)


@pytest.mark.parametrize("spec", [riesz(1, 0.25), riesz(2, 0.5), coulomb(2)])
def test_splitting_identity_random(spec, rng):
    grid = Grid.cube(spec.d, 2.0, 128 if spec.d == 2 else 512)
    for _ in range(10):
        mu = DensityMeasure.from_function(grid, bump(rng.uniform(-0.5, 0.5, spec.d), rng.uniform(0.2, 0.5)))
        X = ParticleConfiguration(rng.uniform(-1.5, 1.5, (int(rng.integers(1, 65)), spec.d)))
        assert verify_splitting(X, mu, QUAD, spec).residual <= 1e-10


def test_splitting_single_particle_by_hand():
    grid = Grid.cube(2, 2.0, 64)
    spec = coulomb(2)
    mu = DensityMeasure.from_function(grid, bump([0, 0], 0.3))
    x = np.array([[0.25, 0.5]])
    res = verify_splitting(ParticleConfiguration(x), mu, QUAD, spec)
    h = potential_field(mu, spec, check_padding=False)
    v = interpolate(grid, QUAD.on_grid(grid), x)[0]
    assert res.hamiltonian == pytest.approx(v, rel=1e-13)
    hx = interpolate(grid, h, x)[0]
    by_hand = (-2 * hx + mu.integrate(h)) - mu.integrate(h) + (2 * hx + v)
    assert res.identity_rhs == pytest.approx(by_hand, rel=1e-12)


@pytest.mark.parametrize("theta", [10.0, 100.0])
def test_splitting_thermal_form(theta, rng):
    grid = Grid.cube(1, 2.0, 512)
    spec = riesz(1, 0.25)
    sol = solve_thermal(QUAD, spec, grid, theta)
    for _ in range(10):
        X = ParticleConfiguration(rng.uniform(-1.5, 1.5, (16, 1)))
        res = verify_splitting(X, sol, QUAD, spec)
        assert res.fn_residual is not None
        assert res.fn_residual <= 10 * max(sol.fixed_point_residual, 1e-12)


def test_splitting_equilibrium_form():
    grid = Grid.cube(1, 2.0, 256)
    spec = riesz(1, 0.25)
    sol = solve_equilibrium(QUAD, spec, grid, tol=1e-9)
    X = ParticleConfiguration(np.linspace(-1.2, 1.3, 9)[:, None])
    res = verify_splitting(X, sol, QUAD, spec, foc_tol=1e-8)
    assert res.fn_residual is not None and res.fn_residual <= 1e-10
