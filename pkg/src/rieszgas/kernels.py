"""Interaction kernels: construction, evaluation, Fourier symbols and validation.

Fourier convention: unitary, angular frequency,
``f^(xi) = (2 pi)^(-d/2) * int f(x) exp(-i x.xi) dx``. The *symbol* returned by
:func:`fourier_symbol` is the convolution multiplier ``m(xi)`` with
``(g * f)^ = m f^``, i.e. ``(2 pi)^(d/2)`` times the unitary transform of ``g``.
Normalizations are chosen so that ``m(xi) = |xi|^(-2s)`` for Riesz and
``|xi|^(-2)`` for Coulomb, which makes ``g`` the fundamental solution of
``(-Delta)^s`` and ``int |mu^|^2 m dxi`` equal to the interaction energy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gamma

from .errors import ConditioningError, SingularityError
from .grid import Grid, unit_sphere_area

FAMILIES = ("coulomb", "riesz", "custom", "none")


def riesz_constant(d: int, s: float) -> float:
    """Constant making ``c |x|^(2s-d)`` the fundamental solution of ``(-Delta)^s``."""
    return float(gamma(d / 2 - s) / (4.0 ** s * np.pi ** (d / 2) * gamma(s)))


def coulomb_constant(d: int) -> float:
    if d == 2:
        return 1.0 / (2.0 * np.pi)
    return riesz_constant(d, 1.0)


def fractional_laplacian_constant(d: int, s: float) -> float:
    """Constant ``C`` in ``(-Delta)^s f(x) = C/2 int (2f(x)-f(x+y)-f(x-y)) |y|^(-d-2s) dy``."""
    return float(4.0 ** s * gamma(d / 2 + s) / (np.pi ** (d / 2) * abs(gamma(-s))))


@dataclass(frozen=True)
class KernelSpec:
    """Interaction kernel ``g``.

    For ``family="custom"`` the evaluators take arrays of shape ``(..., d)``
    and return arrays of shape ``(...)``. ``family="none"`` is the
    interaction-free test mode (``g = 0``).
    """

    family: str
    d: int
    s: float
    c: float
    g: Callable | None = field(default=None, compare=True)
    ghat: Callable | None = field(default=None, compare=True)
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.family == "riesz" and not (0.0 < self.s < min(1.0, self.d / 2)):
            raise ValueError(f"Riesz order must satisfy 0 < s < min(1, d/2); got s={self.s}, d={self.d}")
        if self.family == "coulomb" and (self.d < 2 or self.s != 1.0):
            raise ValueError("Coulomb kernel requires d >= 2 and s = 1")
        if self.family == "custom" and (self.g is None or self.ghat is None):
            raise ValueError("custom kernels need both real-space and Fourier evaluators")
        if self.family != "none" and not self.c > 0:
            raise ValueError("normalization constant must be positive")

    @property
    def is_log(self) -> bool:
        return self.family == "coulomb" and self.d == 2

    @property
    def exponent(self) -> float:
        """Power ``2s - d`` of the radial profile (meaningless for the log kernel)."""
        return 2.0 * self.s - self.d

    @property
    def builtin(self) -> bool:
        return self.family in ("coulomb", "riesz", "none")

    def label(self) -> str:
        if self.family == "riesz":
            return f"riesz(d={self.d}, s={self.s:g})"
        if self.family == "coulomb":
            return f"coulomb(d={self.d})"
        if self.family == "none":
            return f"none(d={self.d})"
        return self.name or f"custom(d={self.d}, s={self.s:g})"

    def to_dict(self) -> dict:
        return {"family": self.family, "d": self.d, "s": self.s, "c": self.c, "name": self.label()}


def riesz(d: int, s: float) -> KernelSpec:
    return KernelSpec("riesz", d, float(s), riesz_constant(d, s))


def coulomb(d: int) -> KernelSpec:
    return KernelSpec("coulomb", d, 1.0, coulomb_constant(d))


def no_interaction(d: int) -> KernelSpec:
    return KernelSpec("none", d, 0.5, 0.0)


def custom(d: int, s: float, g: Callable, ghat: Callable, name: str = "") -> KernelSpec:
    return KernelSpec("custom", d, float(s), 1.0, g, ghat, name)


def radial_profile(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    """``g`` as a function of ``|x|`` for built-in kernels (no singularity check)."""
    r = np.asarray(r, float)
    if spec.family == "none":
        return np.zeros_like(r)
    if spec.is_log:
        return -spec.c * np.log(r)
    if spec.family in ("riesz", "coulomb"):
        return spec.c * r ** spec.exponent
    raise ValueError("radial profile only defined for built-in kernels")


def eval_kernel(spec: KernelSpec, x) -> np.ndarray | float:
    """Evaluate ``g(x)``. ``x`` has shape ``(d,)`` or ``(..., d)``."""
    x = np.asarray(x, float)
    if x.shape[-1] != spec.d:
        raise ValueError(f"points must have {spec.d} coordinates")
    r = np.sqrt(np.sum(x * x, axis=-1))
    if np.any(r == 0.0):
        raise SingularityError("kernel evaluated at the origin")
    out = np.asarray(spec.g(x), float) if spec.family == "custom" else radial_profile(spec, r)
    return float(out) if out.ndim == 0 else out


def _symbol_unchecked(spec: KernelSpec, xi: np.ndarray) -> np.ndarray:
    r = np.sqrt(np.sum(xi * xi, axis=-1))
    if spec.family == "none":
        return np.zeros_like(r)
    if spec.family == "custom":
        return np.asarray(spec.ghat(xi), float)
    with np.errstate(divide="ignore"):
        return r ** (-2.0 * spec.s)


def fourier_symbol(spec: KernelSpec, xi) -> np.ndarray | float:
    """Convolution multiplier ``m(xi)``; ``|xi|^(-2s)`` for built-in kernels."""
    xi = np.asarray(xi, float)
    if xi.shape[-1] != spec.d:
        raise ValueError(f"frequencies must have {spec.d} coordinates")
    if np.any(np.sum(xi * xi, axis=-1) == 0.0):
        raise SingularityError("Fourier symbol evaluated at zero frequency")
    out = _symbol_unchecked(spec, xi)
    return float(out) if np.ndim(out) == 0 else out


def inverse_symbol(spec: KernelSpec, xi: np.ndarray) -> np.ndarray:
    """``1/m(xi)`` with the removable value 0 at ``xi = 0``."""
    r2 = np.sum(xi * xi, axis=-1)
    out = np.zeros(r2.shape)
    nz = r2 > 0
    if spec.builtin:
        out[nz] = r2[nz] ** spec.s
    else:
        out[nz] = 1.0 / _symbol_unchecked(spec, xi[nz])
    return out


# ---------------------------------------------------------------------------
# cell integrals


def _cube_face_nodes(d: int, m: int = 48) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on [-1/2, 1/2]^(d-1)."""
    if d == 1:
        return np.zeros((1, 0)), np.ones(1)
    x, w = np.polynomial.legendre.leggauss(m)
    x, w = x / 2, w / 2
    grids = np.meshgrid(*([x] * (d - 1)), indexing="ij")
    wgrid = np.ones_like(grids[0])
    for wk in np.meshgrid(*([w] * (d - 1)), indexing="ij"):
        wgrid = wgrid * wk
    return np.stack([g.ravel() for g in grids], axis=-1), wgrid.ravel()


@lru_cache(maxsize=None)
def unit_cube_power_integral(d: int, p: float) -> float:
    """``int_{[-1/2,1/2]^d} |u|^p du`` for ``p > -d`` (pyramid decomposition)."""
    if p <= -d:
        raise ValueError("integral diverges for p <= -d")
    v, w = _cube_face_nodes(d)
    face = np.sum(w * (np.sum(v * v, axis=1) + 0.25) ** (p / 2))
    return float(d / (p + d) * face)


@lru_cache(maxsize=None)
def unit_cube_log_integral(d: int) -> float:
    """``int_{[-1/2,1/2]^d} log|u| du``."""
    v, w = _cube_face_nodes(d)
    face = np.sum(w * 0.5 * np.log(np.sum(v * v, axis=1) + 0.25))
    return float(-1.0 / d + face)


@lru_cache(maxsize=None)
def cube_exterior_power_integral(d: int, s: float) -> float:
    """``int_{|y|_inf > 1} |y|^(-d-2s) dy``; scales as ``a^(-2s)`` for the cube of half side ``a``."""
    if d == 1:
        return 1.0 / s
    v, w = _cube_face_nodes(d, 96)
    v = 2 * v
    w = w * 2 ** (d - 1)
    return float(d / s * np.sum(w * (np.sum(v * v, axis=1) + 1.0) ** (-(d + 2 * s) / 2)))


def _custom_cell_average(spec: KernelSpec, h: float) -> float:
    d = spec.d
    v, wv = _cube_face_nodes(d, 24)
    tau, wt = np.polynomial.legendre.leggauss(40)
    tau, wt = (tau + 1) / 2, wt / 2
    a = 1.0 / (2 * spec.s)
    t = tau ** a
    jac = a * tau ** (a - 1) * t ** (d - 1) * 0.5
    total = 0.0
    for axis in range(d):
        for sign in (-0.5, 0.5):
            face = np.insert(v, axis, sign, axis=1)
            pts = h * t[:, None, None] * face[None, :, :]
            vals = np.asarray(spec.g(pts), float)
            total += np.sum(wt[:, None] * jac[:, None] * wv[None, :] * vals)
    return float(total)


def cell_average(spec: KernelSpec, h: float) -> float:
    """Mean of ``g`` over the cube of side ``h`` centred at the origin."""
    if spec.family == "none":
        return 0.0
    if spec.is_log:
        return float(-spec.c * (np.log(h) + unit_cube_log_integral(spec.d)))
    if spec.family in ("riesz", "coulomb"):
        return float(spec.c * h ** spec.exponent * unit_cube_power_integral(spec.d, spec.exponent))
    return _custom_cell_average(spec, h)


# ---------------------------------------------------------------------------
# free-space discrete convolution


class FreeSpaceConvolution:
    """Exact linear convolution of a cell field with ``g`` on a fixed grid.

    ``apply(rho)`` returns ``sum_j g(x_i - x_j) rho_j h^d`` with the ``j = i``
    term replaced by the exact cell average of ``g``. The grid is zero-padded
    to ``2n`` per axis, so no periodic images enter.
    """

    def __init__(self, spec: KernelSpec, grid: Grid):
        self.spec, self.grid = spec, grid
        n, d = grid.n, grid.d
        m = 2 * n
        offs = np.fft.fftfreq(m, 1.0 / m)  # integer offsets in [-n, n)
        mesh = np.meshgrid(*([offs] * d), indexing="ij")
        y = np.stack(mesh, axis=-1) * grid.h
        r = np.sqrt(np.sum(y * y, axis=-1))
        ker = np.zeros((m,) * d)
        nz = r > 0
        if spec.family == "custom":
            ker[nz] = np.asarray(spec.g(y[nz]), float)
        elif spec.family != "none":
            ker[nz] = radial_profile(spec, r[nz])
        ker[(0,) * d] = cell_average(spec, grid.h)
        # offset -n is never reached by a pair of cells in the box
        for k in range(d):
            idx = [slice(None)] * d
            idx[k] = n
            ker[tuple(idx)] = 0.0
        self.kernel = ker * grid.cell_volume
        self.kernel_hat = np.fft.rfftn(self.kernel, axes=tuple(range(self.kernel.ndim)))
        self._pad_shape = (m,) * d

    def apply(self, rho: np.ndarray) -> np.ndarray:
        n = self.grid.n
        ax = tuple(range(rho.ndim))
        out = np.fft.irfftn(np.fft.rfftn(rho, s=self._pad_shape, axes=ax) * self.kernel_hat, s=self._pad_shape, axes=ax)
        return out[(slice(0, n),) * self.grid.d]


@lru_cache(maxsize=32)
def free_space_convolution(spec: KernelSpec, grid: Grid) -> FreeSpaceConvolution:
    return FreeSpaceConvolution(spec, grid)


def padded_frequencies(grid: Grid, pad: int = 2, real: bool = False) -> np.ndarray:
    """Angular frequency lattice (shape ``(...,) + (d,)``) of the ``pad``-times padded grid."""
    m = pad * grid.n
    axes = [2 * np.pi * np.fft.fftfreq(m, grid.h)] * grid.d
    if real:
        axes[-1] = 2 * np.pi * np.fft.rfftfreq(m, grid.h)
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


# ---------------------------------------------------------------------------
# the inverse operator of the convolution


def apply_D(spec: KernelSpec, f: np.ndarray, grid: Grid, method: str = "spectral",
            boundary_tol: float = 1e-6, rtol: float = 1e-12) -> np.ndarray:
    """Inverse of convolution with ``g``.

    ``method="spectral"`` multiplies the zero-padded transform of ``f`` by
    ``1/m(xi)``; it requires ``f`` to vanish near the box boundary (relative
    level ``boundary_tol``). ``method="free_space"`` inverts the discrete
    free-space convolution used by ``potential_field`` exactly (Krylov solve,
    spectral preconditioner), so it accepts fields such as ``h^mu`` that do not
    decay inside the box.
    """
    f = np.asarray(f, float)
    if f.shape != grid.shape:
        raise ValueError("field shape does not match grid")
    if method == "spectral":
        peak = np.max(np.abs(f))
        if peak > 0 and np.max(np.abs(f[grid.boundary_mask()])) > boundary_tol * peak:
            raise ConditioningError(
                "field does not decay at the box boundary; the spectral inverse is not "
                "integrable on this grid (use method='free_space' or enlarge the box)")
        mult = inverse_symbol(spec, padded_frequencies(grid, 2, real=True))
        if not spec.builtin or spec.family == "none" or not np.any(f):
            return _spectral_multiply(f, grid, mult)
        # the image decays like |x|^(-d-2s); a Gaussian matching mass and centre
        # is handled in closed form so the padded remainder decays two orders faster
        gauss, image = _gaussian_moment_match(spec, f, grid)
        return _spectral_multiply(f - gauss, grid, mult) + image
    if method == "free_space":
        return _free_space_solve(spec, f, grid, rtol)
    raise ValueError(f"unknown method {method!r}")


def gaussian_image(spec: KernelSpec, a: float, r2: np.ndarray) -> np.ndarray:
    """``(-Delta)^s`` of ``(a/pi)^(d/2) exp(-a |x|^2)`` at squared radii ``r2``."""
    from scipy.special import hyp1f1

    d, s = spec.d, spec.s
    return ((a / np.pi) ** (d / 2) * (4 * a) ** s * gamma(d / 2 + s) / gamma(d / 2)
            * hyp1f1(d / 2 + s, d / 2, -a * r2))


def _gaussian_moment_match(spec: KernelSpec, f: np.ndarray, grid: Grid):
    mass = grid.integrate(f)
    weight = np.abs(f)
    wsum = np.sum(weight)
    pts = grid.mesh()
    centre = [np.sum(weight * m) / wsum for m in pts]
    r2 = sum((m - c) ** 2 for m, c in zip(pts, centre))
    var = np.sum(weight * r2) / wsum / grid.d
    var = float(np.clip(var, (2 * grid.h) ** 2, (grid.side / 10) ** 2))
    a = 1.0 / (2.0 * var)
    gauss = mass * (a / np.pi) ** (grid.d / 2) * np.exp(-a * r2)
    return gauss, mass * gaussian_image(spec, a, r2)


def _spectral_multiply(f: np.ndarray, grid: Grid, mult: np.ndarray) -> np.ndarray:
    m = (2 * grid.n,) * grid.d
    ax = tuple(range(f.ndim))
    out = np.fft.irfftn(np.fft.rfftn(f, s=m, axes=ax) * mult, s=m, axes=ax)
    return out[(slice(0, grid.n),) * grid.d]


def _free_space_solve(spec: KernelSpec, f: np.ndarray, grid: Grid, rtol: float) -> np.ndarray:
    from scipy.sparse.linalg import LinearOperator, minres

    conv = free_space_convolution(spec, grid)
    size = f.size
    shape = grid.shape
    inv = inverse_symbol(spec, padded_frequencies(grid, 2, real=True))
    # positive definite preconditioner: the continuous inverse plus a small floor
    floor = np.max(inv) * 1e-8
    A = LinearOperator((size, size), matvec=lambda v: conv.apply(v.reshape(shape)).ravel(), dtype=float)
    M = LinearOperator((size, size), matvec=lambda v: _spectral_multiply(v.reshape(shape), grid, inv + floor).ravel(),
                       dtype=float)
    sol, info = minres(A, f.ravel(), M=M, rtol=rtol, maxiter=2000)
    if info != 0:
        raise ConditioningError(f"free-space inverse did not converge (minres info={info})")
    return sol.reshape(shape)


def apply_D_real_space(spec: KernelSpec, f: np.ndarray, grid: Grid, index: np.ndarray) -> np.ndarray:
    """Second-difference quadrature of ``(-Delta)^s f`` at the cells ``index`` (m, d).

    Uses the positive kernel ``C |y|^(-d-2s)``, zero extension outside the
    box, a Taylor correction on the self cell and the analytic tail beyond
    the padded window. Valid for built-in Riesz kernels only.
    """
    if spec.family != "riesz":
        raise ValueError("real-space form implemented for Riesz kernels")
    d, n, h, s = grid.d, grid.n, grid.h, spec.s
    C = fractional_laplacian_constant(d, s)
    w = 2 * n  # half width of the offset window, in cells
    fp = np.pad(f, [(w, w)] * d)
    offs = np.arange(-w, w + 1)
    mesh = np.stack(np.meshgrid(*([offs] * d), indexing="ij"), axis=-1)
    r = np.sqrt(np.sum(mesh * mesh, axis=-1)) * h
    K = np.zeros(r.shape)
    K[r > 0] = C * r[r > 0] ** (-d - 2 * s) * h ** d
    lap = _laplacian(f, h)
    self_cell = C * h ** (2 - 2 * s) * unit_cube_power_integral(d, 2 - d - 2 * s) / d
    tail = C * cube_exterior_power_integral(d, s) * ((w + 0.5) * h) ** (-2 * s)
    out = np.empty(len(index))
    for k, idx in enumerate(np.atleast_2d(index)):
        sl = tuple(slice(i, i + 2 * w + 1) for i in idx)
        window = fp[sl]
        center = f[tuple(idx)]
        # symmetric window: sum of f(x+y) K equals sum of f(x-y) K
        out[k] = np.sum((center - window) * K) - 0.5 * lap[tuple(idx)] * self_cell + center * tail
    return out


def _laplacian(f: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    for ax in range(f.ndim):
        out += (np.roll(f, 1, ax) - 2 * f + np.roll(f, -1, ax)) / h ** 2
    return out


# ---------------------------------------------------------------------------
# smearing


def smeared_self_energy(spec: KernelSpec, eta: float, q: int | None = None, h_grid: float | None = None) -> float:
    """``(g * sigma_eta)(0)`` with ``sigma_eta`` the uniform measure on the sphere of radius ``eta``.

    The sphere average uses :func:`sphere_quadrature` with ``q`` points
    (default ``max(16, ceil(eta/h_grid)*8)``, or 64 without a grid).
    """
    from .grid import sphere_quadrature

    if not 0 < eta:
        raise ValueError("radius must be positive")
    if q is None:
        q = max(16, int(np.ceil(eta / h_grid)) * 8) if h_grid else 64
    u, w = sphere_quadrature(spec.d, q)
    return float(np.sum(w * eval_kernel(spec, eta * u)))


# ---------------------------------------------------------------------------
# validation of the Riesz-type conditions


@dataclass
class ItemVerdict:
    item: int
    verdict: str  # "pass" | "fail" | "inconclusive" | "not checked"
    constants: dict = field(default_factory=dict)
    witness: object = None
    note: str = ""


@dataclass
class ValidationReport:
    kernel: str
    items: dict
    constants: dict
    metadata: dict

    @property
    def passed(self) -> bool:
        return all(v.verdict in ("pass", "not checked") for v in self.items.values())

    def verdicts(self) -> dict:
        return {k: v.verdict for k, v in sorted(self.items.items())}

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "items": {str(k): {"verdict": v.verdict, "constants": v.constants,
                               "witness": _jsonable(v.witness), "note": v.note}
                      for k, v in sorted(self.items.items())},
            "constants": self.constants,
            "metadata": self.metadata,
        }


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


_DEFAULT_TOL = {"even": 1e-12, "trend_factor": 2.0, "per_decade": 16, "c_s_margin": 1e-9}


def _directions(d: int) -> np.ndarray:
    dirs = [np.eye(d)[0], np.ones(d) / np.sqrt(d)]
    rng = np.random.default_rng(20240611)
    extra = rng.standard_normal((6, d))
    dirs.extend(extra / np.linalg.norm(extra, axis=1, keepdims=True))
    return np.array(dirs)


def _diverges(r: np.ndarray, ratio: np.ndarray, end: str, factor: float) -> bool:
    """True when ``ratio`` grows monotonically by more than ``factor`` over the last decade at ``end``."""
    if end == "small":
        sel = r <= r.min() * 10
        seq = ratio[sel][::-1]  # ordered toward the end
    else:
        sel = r >= r.max() / 10
        seq = ratio[sel]
    if len(seq) < 3 or np.any(~np.isfinite(seq)):
        return bool(np.any(~np.isfinite(seq)))
    mono = np.all(np.diff(seq) > 0)
    return bool(mono and seq[-1] > factor * seq[0])


def validate_riesz_type(spec: KernelSpec, grid: Grid, tol: dict | None = None) -> ValidationReport:
    """Numerically check the real- and Fourier-space Riesz-type conditions on ``g``.

    Checked: evenness (2), blow-up at the origin (3), growth of ``|g|`` and
    ``|grad g|`` (5, 6), two-sided Fourier bound (8), radial decay ratio (9),
    two-sided bound on the inverse transform of ``1/m`` (10). Items 1, 4, 7
    concern an extension to a higher-dimensional space and are not checked.
    """
    t = dict(_DEFAULT_TOL, **(tol or {}))
    d, s = spec.d, spec.s
    p = 2 * s - d
    factor = t["trend_factor"]
    r_lo, r_hi = grid.h, grid.side / 2
    ndec = np.log10(r_hi / r_lo)
    radii = np.logspace(np.log10(r_lo), np.log10(r_hi), max(8, int(t["per_decade"] * ndec)))
    dirs = _directions(d)
    pts = radii[:, None, None] * dirs[None, :, :]  # (nr, ndir, d)
    items: dict[int, ItemVerdict] = {}
    for k, reason in ((1, "extension kernel"), (4, "extension kernel"), (7, "extension kernel")):
        items[k] = ItemVerdict(k, "not checked", note=f"{reason}: not checked (m > 0 out of scope)")

    G = eval_kernel(spec, pts)

    # item 2: evenness
    Gm = eval_kernel(spec, -pts)
    gridpts = grid.points().reshape(-1, d)
    gridpts = gridpts[np.sum(gridpts ** 2, axis=1) > 0]
    err_grid = np.abs(eval_kernel(spec, gridpts) - eval_kernel(spec, -gridpts))
    scale = np.maximum(np.abs(G), 1e-300)
    rel = np.abs(G - Gm) / scale
    worst = np.unravel_index(np.argmax(rel), rel.shape)
    ok = rel.max() <= t["even"] and np.all(err_grid <= t["even"] * np.maximum(1.0, np.abs(eval_kernel(spec, gridpts))))
    items[2] = ItemVerdict(2, "pass" if ok else "fail", {"max_rel_asymmetry": float(rel.max())},
                           pts[worst].tolist())

    # item 3: g -> +inf at the origin; increments per decade must not shrink
    prof = G.mean(axis=1)
    dec = radii <= radii[0] * 10 + 1e-300
    # half-decade steps inward from the grid spacing; a bounded g gains less and less per step
    r_small = radii[0] * 10.0 ** (-0.5 * np.arange(5))
    prof_small = eval_kernel(spec, r_small[:, None] * dirs[0][None, :])
    inc = np.diff(prof_small)  # value gained moving toward the origin
    if np.all(inc > 0) and inc[-1] >= 0.9 * inc[0] and prof_small[-1] > 0:
        v3 = "pass"
    elif np.all(inc > 0) and inc[-1] >= 0.5 * inc[0]:
        v3 = "inconclusive"
    else:
        v3 = "fail"
    items[3] = ItemVerdict(3, v3, {"g_at_r_min": float(prof_small[-1]),
                                   "increment_ratio": float(inc[-1] / inc[0]) if inc[0] else float("inf")},
                           (r_small[-1] * dirs[0]).tolist(),
                           "bounded at origin" if v3 == "fail" else "")
    del dec, prof

    # item 5: |g| <= C |x|^(2s-d)
    ratio5 = (np.abs(G) / radii[:, None] ** p).max(axis=1)
    div5 = _diverges(radii, ratio5, "small", factor) or _diverges(radii, ratio5, "large", factor)
    i5 = int(np.argmax(ratio5))
    items[5] = ItemVerdict(5, "fail" if div5 else "pass", {"C": float(ratio5.max())}, float(radii[i5]),
                           "ratio unbounded along the sample trend" if div5 else "")

    # item 6: |grad g| <= C |x|^(2s-d-1), central differences with step h/4
    step = grid.h / 4
    grad = np.zeros(pts.shape)
    for k in range(d):
        e = np.zeros(d)
        e[k] = step
        grad[..., k] = (eval_kernel(spec, pts + e) - eval_kernel(spec, pts - e)) / (2 * step)
    gnorm = np.sqrt(np.sum(grad ** 2, axis=-1))
    ratio6 = (gnorm / radii[:, None] ** (p - 1)).max(axis=1)
    div6 = _diverges(radii, ratio6, "small", factor) or _diverges(radii, ratio6, "large", factor)
    i6 = int(np.argmax(ratio6))
    items[6] = ItemVerdict(6, "fail" if div6 else "pass", {"C": float(ratio6.max())}, float(radii[i6]),
                           "ratio unbounded along the sample trend" if div6 else "")

    # item 8: C1 |xi|^(-2s) <= m(xi) <= C2 |xi|^(-2s)
    k_lo, k_hi = 2 * np.pi / grid.side / 10, 10 * np.pi / grid.h
    ks = np.logspace(np.log10(k_lo), np.log10(k_hi), max(8, int(t["per_decade"] * np.log10(k_hi / k_lo))))
    xis = ks[:, None, None] * dirs[None, :, :]
    ratio8 = fourier_symbol(spec, xis) * ks[:, None] ** (2 * s)
    lo8, hi8 = ratio8.min(axis=1), ratio8.max(axis=1)
    C1, C2 = float(lo8.min()), float(hi8.max())
    div8 = (C1 <= 0 or _diverges(ks, hi8, "small", factor) or _diverges(ks, hi8, "large", factor)
            or _diverges(ks, 1 / np.maximum(lo8, 1e-300), "small", factor)
            or _diverges(ks, 1 / np.maximum(lo8, 1e-300), "large", factor))
    iw = np.unravel_index(np.argmax(np.maximum(ratio8 / max(C2, 1e-300), C1 / np.maximum(ratio8, 1e-300))), ratio8.shape)
    items[8] = ItemVerdict(8, "fail" if div8 else "pass", {"C1": C1, "C2": C2}, xis[iw].tolist())

    # item 9: g(y) < c_s g(x) for |y| >= 2|x|, both in B(0, r0)
    r0 = min(0.5, r_hi)
    rr = radii[radii <= r0 / 2]
    if len(rr) < 3:
        items[9] = ItemVerdict(9, "inconclusive", note="grid too coarse below r0")
        cs = float("nan")
    else:
        gx = eval_kernel(spec, rr[:, None, None] * dirs[None, :, :])
        mults = np.array([2.0, 2.5, 3.0, 4.0])
        worst_ratio = np.full(len(rr), -np.inf)
        for mlt in mults:
            yy = np.minimum(rr * mlt, r0)
            gy = eval_kernel(spec, yy[:, None, None] * dirs[None, :, :])
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio9 = np.where(gx[:, None, :] > 0, gy[:, :, None] / gx[:, None, :], np.inf).reshape(len(rr), -1).max(axis=1)
            worst_ratio = np.maximum(worst_ratio, ratio9)
        cs = float(worst_ratio.max())
        trend_up = np.isfinite(cs) and len(rr) >= 3 and np.all(np.diff(worst_ratio[:max(3, len(rr) // 3)][::-1]) > 0)
        if not cs < 1 - t["c_s_margin"]:
            v9 = "fail"
        elif trend_up and worst_ratio[0] > worst_ratio[-1] + 1e-12:
            v9 = "inconclusive"
        else:
            v9 = "pass"
        items[9] = ItemVerdict(9, v9, {"c_s": cs, "r0": r0}, float(rr[int(np.argmax(worst_ratio))]),
                               "ratio creeps toward 1 near the origin" if v9 == "inconclusive" else "")

    # item 10: two-sided bound on h = F(1/m); checked on -h (h < 0 off the origin)
    if spec.family == "coulomb":
        items[10] = ItemVerdict(10, "not checked", note="Coulomb exempt: 1/m = |xi|^2 is not a classical transform")
    elif spec.family == "none":
        items[10] = ItemVerdict(10, "not checked", note="no interaction")
    else:
        items[10] = _check_item10(spec, grid, factor)

    constants = {
        "C5": items[5].constants.get("C"), "C6": items[6].constants.get("C"),
        "C1": items[8].constants.get("C1"), "C2": items[8].constants.get("C2"),
        "c_s": cs, "r0": r0,
    }
    if "C1" in items[10].constants:
        constants["C1_h"] = items[10].constants["C1"]
        constants["C2_h"] = items[10].constants["C2"]
    meta = {"grid": grid.to_dict(), "tol": t, "r_range": [r_lo, r_hi], "xi_range": [k_lo, k_hi]}
    return ValidationReport(spec.label(), items, constants, meta)


def inverse_symbol_kernel(spec: KernelSpec, d: int, spacing: float, size: int, eps: float) -> np.ndarray:
    """Gaussian-regularized inverse transform of ``1/m`` on a periodic lattice.

    Returns ``(F^-1[exp(-eps^2 |xi|^2) / m(xi)])(x_j)`` with the origin at index 0.
    """
    k = 2 * np.pi * np.fft.fftfreq(size, spacing)
    xi = np.stack(np.meshgrid(*([k] * d), indexing="ij"), axis=-1)
    mult = inverse_symbol(spec, xi) * np.exp(-eps ** 2 * np.sum(xi * xi, axis=-1))
    return np.real(np.fft.ifftn(mult)) / spacing ** d


def _check_item10(spec: KernelSpec, grid: Grid, factor: float) -> ItemVerdict:
    d, s = spec.d, spec.s
    size = {1: 2 ** 14, 2: 2 ** 11, 3: 2 ** 7}.get(d)
    if size is None:
        return ItemVerdict(10, "inconclusive", note="dimension too large for the lattice check")
    spacing = grid.h
    eps = spacing
    hk = inverse_symbol_kernel(spec, d, spacing, size, eps)
    # periodic images stay below ~2% of the sampled value within size/16
    imax = size // 16 if d < 3 else size // 8
    imin = 10
    if imax <= imin + 2:
        return ItemVerdict(10, "inconclusive", note="lattice too small to separate scales")
    samples, rs = [], []
    for direction in (np.eye(d)[0].astype(int), np.ones(d, dtype=int)):
        steps = np.unique(np.round(np.logspace(np.log10(imin), np.log10(imax / np.max(direction)), 40)).astype(int))
        for j in steps:
            idx = tuple(int(j * c) % size for c in direction)
            r = j * spacing * np.linalg.norm(direction)
            samples.append(-hk[idx] * r ** (d + 2 * s))
            rs.append(r)
    rs, samples = np.array(rs), np.array(samples)
    order = np.argsort(rs)
    rs, samples = rs[order], samples[order]
    if np.any(samples <= 0):
        i = int(np.argmin(samples))
        return ItemVerdict(10, "fail", {"C1": float(samples.min()), "C2": float(samples.max())}, float(rs[i]),
                           "inverse-symbol kernel changes sign")
    C1, C2 = float(samples.min()), float(samples.max())
    div = (_diverges(rs, samples, "small", factor) or _diverges(rs, samples, "large", factor)
           or _diverges(rs, 1 / samples, "small", factor) or _diverges(rs, 1 / samples, "large", factor))
    i = int(np.argmax(np.abs(np.log(samples / np.sqrt(C1 * C2)))))
    note = "checked on -h: the inverse-symbol kernel is negative away from the origin"
    if np.log10(rs.max() / rs.min()) < 1:
        return ItemVerdict(10, "pass" if not div else "inconclusive", {"C1": C1, "C2": C2}, float(rs[i]),
                           note + "; fewer than one decade sampled")
    return ItemVerdict(10, "fail" if div else "pass", {"C1": C1, "C2": C2}, float(rs[i]), note)


def sphere_area(d: int) -> float:
    return unit_sphere_area(d)
