import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import exp1, gamma, hyp1f1

from rieszgas.errors import ConditioningError, SingularityError
from rieszgas.grid import Grid
from rieszgas.kernels import (apply_D, apply_D_real_space, coulomb, custom, eval_kernel, fourier_symbol, riesz,
                              riesz_constant, smeared_self_energy, validate_riesz_type)
from rieszgas.measures import DensityMeasure, potential_field


def gaussian_potential(spec, a, r):
    """Closed-form ``g * gamma_a`` for ``gamma_a = (a/pi)^(d/2) exp(-a |x|^2)``, from the Fourier side."""
    d = spec.d
    if spec.is_log:
        r = np.maximum(r, 1e-300)
        return -(np.log(r) + 0.5 * exp1(a * r * r)) / (2 * np.pi)
    s = spec.s
    return (a / np.pi) ** (d / 2) * (4 * a) ** (-s) * gamma(d / 2 - s) / gamma(d / 2) * hyp1f1(d / 2 - s, d / 2,
                                                                                                -a * r * r)


def test_coulomb_2d_unit_distance_is_zero():
    assert eval_kernel(coulomb(2), [0.6, 0.8]) == pytest.approx(0.0, abs=1e-15)


def test_riesz_1d_power_law():
    spec = riesz(1, 0.25)
    assert eval_kernel(spec, [16.0]) == pytest.approx(riesz_constant(1, 0.25) / 4, rel=1e-14)


def test_symbol_values():
    assert fourier_symbol(coulomb(3), [0.0, 2.0, 0.0]) == pytest.approx(0.25)
    assert fourier_symbol(riesz(2, 0.5), [9.0, 0.0]) == pytest.approx(1 / 9)


def test_singular_points_raise():
    with pytest.raises(SingularityError):
        eval_kernel(riesz(2, 0.5), [0.0, 0.0])
    with pytest.raises(SingularityError):
        fourier_symbol(coulomb(2), [0.0, 0.0])


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2).filter(lambda v: np.hypot(*v) > 1e-3),
       st.sampled_from([0.25, 0.5, 0.75]))
def test_symbol_and_kernel_even(xi, s):
    spec = riesz(2, s)
    xi = np.array(xi)
    assert fourier_symbol(spec, xi) == fourier_symbol(spec, -xi)
    assert eval_kernel(spec, xi) == eval_kernel(spec, -xi)


@given(st.floats(0.05, 20), st.floats(0.1, 10))
def test_riesz_homogeneity(r, lam):
    spec = riesz(3, 0.75)
    x = np.array([r, 0.0, 0.0])
    assert eval_kernel(spec, lam * x) == pytest.approx(lam ** (2 * 0.75 - 3) * eval_kernel(spec, x), rel=1e-12)


@pytest.mark.parametrize("spec,hw", [(riesz(1, 0.25), 6.0), (riesz(2, 0.5), 4.0), (coulomb(2), 4.0)])
def test_grid_convolution_matches_symbol(spec, hw):
    # real-space convolution with sampled g against the transform-side closed form
    n = 256 if spec.d == 1 else 128
    grid = Grid.cube(spec.d, hw, n)
    a = 4.0
    mu = DensityMeasure.from_function(grid, lambda x: np.exp(-a * np.sum(x * x, axis=-1)))
    h = potential_field(mu, spec)
    r = grid.radius()
    exact = gaussian_potential(spec, a, r)
    interior = r < hw / 2
    rel = np.abs(h - exact)[interior] / np.max(np.abs(exact[interior]))
    assert rel.max() <= 0.02


def test_validate_riesz_2d_passes():
    report = validate_riesz_type(riesz(2, 0.5), Grid.cube(2, 2.0, 64))
    verdicts = report.verdicts()
    assert all(v in ("pass", "not checked") for v in verdicts.values()), verdicts
    assert all(verdicts[k] == "pass" for k in (2, 3, 5, 6, 8, 9, 10))


def test_validate_bounded_kernel_fails_item3():
    g = lambda x: np.exp(-np.sqrt(np.sum(np.asarray(x) ** 2, axis=-1)))  # noqa: E731
    ghat = lambda xi: 2 * np.pi / (1 + np.sum(np.asarray(xi) ** 2, axis=-1)) ** 1.5  # noqa: E731
    report = validate_riesz_type(custom(2, 0.5, g, ghat, "exp"), Grid.cube(2, 2.0, 32))
    assert report.items[3].verdict == "fail"
    assert not report.passed


def test_validate_perturbed_riesz_enlarges_constants():
    base = riesz(2, 0.5)
    sigma, eps = 0.3, 0.5

    def g(x):
        r2 = np.sum(np.asarray(x) ** 2, axis=-1)
        return base.c / np.sqrt(r2) + eps * np.exp(-r2 / (2 * sigma ** 2))

    def ghat(xi):
        k2 = np.sum(np.asarray(xi) ** 2, axis=-1)
        return 1 / np.sqrt(k2) + eps * 2 * np.pi * sigma ** 2 * np.exp(-sigma ** 2 * k2 / 2)

    grid = Grid.cube(2, 2.0, 64)
    plain = validate_riesz_type(base, grid)
    bumped = validate_riesz_type(custom(2, 0.5, g, ghat, "bumped"), grid)
    for item in (5, 8):
        assert bumped.items[item].verdict == "pass"
    assert bumped.constants["C5"] > plain.constants["C5"]
    assert bumped.constants["C2"] > plain.constants["C2"]


@pytest.mark.parametrize("spec", [riesz(1, 0.25), riesz(2, 0.5), coulomb(2)])
def test_apply_D_inverts_potential(spec):
    grid = Grid.cube(spec.d, 2.0, 256 if spec.d == 1 else 64)
    mu = DensityMeasure.from_function(grid, lambda x: np.exp(-8 * np.sum(x * x, axis=-1)))
    h = potential_field(mu, spec)
    back = apply_D(spec, h, grid, method="free_space")
    assert np.linalg.norm(back - mu.values) / np.linalg.norm(mu.values) <= 1e-6


def test_apply_D_single_mode():
    spec = riesz(1, 0.25)
    grid = Grid.cube(1, 40.0, 4096)
    x = grid.axes[0]
    k = 3.0
    window = np.exp(-(x / 10) ** 2)
    f = window * np.cos(k * x)
    Df = apply_D(spec, f, grid)
    core = np.abs(x) < 10
    err = np.linalg.norm((Df - k ** (2 * spec.s) * f)[core]) / np.linalg.norm((k ** (2 * spec.s) * f)[core])
    assert err <= 0.02


def test_apply_D_spectral_matches_real_space():
    spec = riesz(1, 0.25)
    grid = Grid.cube(1, 4.0, 512)
    f = grid.evaluate(lambda x: np.exp(-4 * np.sum(x * x, axis=-1)) * (1 + x[..., 0]))
    spectral = apply_D(spec, f, grid)
    idx = np.linspace(160, 352, 32).astype(int)[:, None]
    real = apply_D_real_space(spec, f, grid, idx)
    ref = np.max(np.abs(spectral))
    assert np.max(np.abs(spectral[idx[:, 0]] - real)) <= 0.01 * ref


def test_apply_D_spectral_needs_decay():
    grid = Grid.cube(1, 1.0, 64)
    with pytest.raises(ConditioningError):
        apply_D(riesz(1, 0.25), np.ones(grid.shape), grid)


def test_smeared_coulomb_3d_shell():
    spec = coulomb(3)
    for eta in (0.1, 0.5, 2.0):
        assert smeared_self_energy(spec, eta, q=512) == pytest.approx(1 / (4 * math.pi * eta), rel=1e-6)


@pytest.mark.parametrize("d,s", [(1, 0.25), (2, 0.5), (3, 0.75)])
def test_smeared_homogeneity(d, s):
    spec = riesz(d, s)
    ratio = smeared_self_energy(spec, 0.2, q=256) / smeared_self_energy(spec, 0.1, q=256)
    assert ratio == pytest.approx(2 ** (2 * s - d), rel=1e-6)


@pytest.mark.parametrize("spec", [riesz(2, 0.5), coulomb(3), riesz(3, 0.5)])
def test_smeared_refinement(spec):
    a = smeared_self_energy(spec, 0.3, h_grid=0.05)
    b = smeared_self_energy(spec, 0.3, h_grid=0.025)
    assert abs(a - b) <= 1e-3 * abs(b)
