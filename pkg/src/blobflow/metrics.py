"""Wasserstein distances in 1-D, commutator norms, growth-bound checks and rate fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError, InvalidParameterError
from .kernels import KernelFamily, MollifierKernel, unit_tail_radius
from .model import ParticleState


def _atoms(a) -> np.ndarray:
    if isinstance(a, ParticleState):
        if a.dim != 1:
            raise InvalidParameterError("1-D distances need one-dimensional particles")
        return np.sort(a.positions[:, 0])
    if hasattr(a, "values") and not isinstance(a, np.ndarray):
        return np.sort(np.asarray(a.values, dtype=float).ravel())
    return np.sort(np.asarray(a, dtype=float).ravel())


def _paired(a, b):
    a, b = _atoms(a), _atoms(b)
    if a.size != b.size:
        raise InvalidParameterError(f"atom sets differ in size ({a.size} vs {b.size})")
    if a.size == 0:
        raise InvalidParameterError("empty atom sets")
    return a, b


def w2_1d(a, b) -> float:
    """Exact 2-Wasserstein distance between two uniform atom sets of equal size."""
    a, b = _paired(a, b)
    return math.sqrt(float(np.mean((a - b) ** 2)))


def w1_1d(a, b) -> float:
    """Exact 1-Wasserstein distance between two uniform atom sets of equal size."""
    a, b = _paired(a, b)
    return float(np.mean(np.abs(a - b)))


def w1_particles_vs_density_1d(state, density) -> float:
    """``int |F_particles - F_density|`` over the density grid hull."""
    x = _atoms(state)
    grid = density.grid
    F = density.cdf()
    Fp = np.searchsorted(x, grid, side="right") / x.size
    lo, hi = min(grid[0], x[0]), max(grid[-1], x[-1])
    if lo < grid[0] or hi > grid[-1]:
        raise CoverageError("particles lie outside the density grid")
    return float(np.trapezoid(np.abs(Fp - F), grid))


def _repeat(atoms, k: int) -> np.ndarray:
    return np.repeat(atoms, k)


@dataclass(frozen=True)
class DensityDistance:
    """Distance of a particle set to a density, with the quantization floor at that ``N``."""

    value: float
    floor: float


def quantization_floor(density, N: int) -> float:
    """``d_W`` between the ``N``- and ``2N``-point quantizations of ``density``.

    Estimates the distance of the best equal-weight ``N``-atom set to the
    density itself.
    """
    from .reference import quantize

    qa = _atoms(quantize(density, N))
    qb = _atoms(quantize(density, 2 * N))
    return math.sqrt(float(np.mean((_repeat(qa, 2) - qb) ** 2)))


def w2_particles_vs_density_1d(state, density) -> DensityDistance:
    """``d_W`` between particles and the ``N``-point quantization of ``density``."""
    from .reference import quantize

    x = _atoms(state)
    q = quantize(density, x.size)
    return DensityDistance(w2_1d(x, q), quantization_floor(density, x.size))


# -- commutator --------------------------------------------------------------

@dataclass(frozen=True)
class CommutatorResult:
    norm: float
    ratio: float  # norm / (eps ||D^2 phi||_inf)
    grid_size: int


def coverage_radius(kernel: MollifierKernel, tol: float = 1e-10) -> float:
    """Distance beyond the particle hull where ``V_eps`` is negligible (``>= 6 eps``)."""
    if kernel.compact:
        return 6.0 * kernel.epsilon
    fam = kernel.family
    return max(6.0, unit_tail_radius(fam, "power", tol, 1.0)) * kernel.epsilon


def commutator_norm(state, kernel: MollifierKernel, dphi, d2phi_sup: float, grid=None,
                    n_grid: int = 2048, tol: float = 1e-10) -> CommutatorResult:
    """L2 norm of ``1_{u > 0} (V_eps * (phi' rho) - phi' (V_eps * rho)) / sqrt(u)``, ``u = V_eps * rho``.

    ``rho`` is the empirical measure of ``state`` (d = 1) and ``dphi`` the
    derivative of the test function.  Both convolutions are exact particle
    sums; the square is integrated by the trapezoid rule on a uniform grid
    (default: hull widened by :func:`coverage_radius`, ``n_grid`` nodes).
    """
    x = _atoms(state)
    reach = coverage_radius(kernel, tol)
    if grid is None:
        grid = np.linspace(x[0] - reach, x[-1] + reach, n_grid)
    else:
        grid = np.asarray(grid, dtype=float)
        if grid[0] > x[0] - reach or grid[-1] < x[-1] + reach:
            raise CoverageError(
                f"grid [{grid[0]:.4g}, {grid[-1]:.4g}] does not cover the effective support "
                f"[{x[0] - reach:.4g}, {x[-1] + reach:.4g}]"
            )
    V = kernel.eval(grid[:, None] - x[None, :]) / x.size
    u = V.sum(axis=1)
    num = V @ dphi(x) - dphi(grid) * u
    field = np.zeros_like(u)
    pos = u > 0
    field[pos] = num[pos] / np.sqrt(u[pos])
    norm = math.sqrt(float(np.trapezoid(field**2, grid)))
    scale = kernel.epsilon * d2phi_sup
    return CommutatorResult(norm, norm / scale if scale > 0 else math.inf, grid.size)


# -- growth-bound lemmas -----------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    kind: str
    passed: bool
    max_ratio: float
    constant: float
    samples: int


def _bracket(x):
    return np.sqrt(1.0 + np.sum(x * x, axis=-1))


def _random_ensembles(rng, n_states: int, N: int, d: int, spread: float = 1.0):
    return [rng.normal(scale=spread, size=(N, d)) for _ in range(n_states)]


def _sample_points(rng, n: int, d: int, L: float):
    # half uniform on the box, half log-spread radii to probe the tails
    n1 = n // 2
    a = rng.uniform(-L, L, size=(n1, d))
    r = np.exp(rng.uniform(0.0, math.log(50 * L), size=n - n1))
    dirs = rng.normal(size=(n - n1, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.vstack([a, r[:, None] * dirs])


def peetre_ratio(x, y, p):
    """``(<x>/<y>)^p / (2^(|p|/2) <x - y>^|p|)``, evaluated in log space."""
    x, y = np.atleast_2d(x), np.atleast_2d(y)
    p = np.asarray(p, dtype=float)
    lhs = p * (np.log(_bracket(x)) - np.log(_bracket(y)))
    rhs = 0.5 * np.abs(p) * math.log(2.0) + np.abs(p) * np.log(_bracket(x - y))
    return np.exp(lhs - rhs)


def log_gauss_constant(sigma: float, rho_sup: float) -> float:
    """``max(|log((1 - sigma) ||rho||_inf + sigma)|, 1 + |log sigma|)``."""
    return max(abs(math.log((1.0 - sigma) * rho_sup + sigma)), 1.0 + abs(math.log(sigma)))


def log_global_constant(p: float, R: float, d: int) -> float:
    """Explicit constant for ``|log(N_eps * rho)| <= C (<x>/eps)^p``, ``eps <= 1``.

    The lower bound uses ``<(x - y)/eps>^p <= 2^(p-1) (<x/eps>^p + (R/eps)^p)``
    for ``|y| <= R`` and the upper bound ``N_eps <= eps^-d``; the ``eps``
    dependence is absorbed by ``eps^p |log eps| <= 1/(e p)``.
    """
    cp = 2.0 ** (p - 1.0)
    return max(d / (math.e * p), math.log(2.0) + cp * (1.0 + R**p))


def fast_power_constant(kernel: MollifierKernel, m: float, R: float) -> float:
    """Explicit ``C`` with ``(V_eps * rho)^(m-1) <= C (<x>/eps)^(2 alpha (1 - m))`` for ``eps <= 1``."""
    fam = kernel.family
    d = kernel.dim
    lower = 0.5 * kernel.norm_const * (2.0 * (1.0 + R * R)) ** (-fam.alpha)
    return lower ** (m - 1.0) * kernel.epsilon ** (d * (1.0 - m))


def _half_mass_radius(x):
    r = np.sort(np.sqrt(np.sum(x * x, axis=1)))
    return float(r[(r.size + 1) // 2 - 1])


def _unnormalized_conv(x_eval, particles, eps, p):
    """``(1/N) sum_j eps^-d exp(-<(x - x_j)/eps>^p)`` in log space."""
    d = particles.shape[1]
    diff = (x_eval[:, None, :] - particles[None, :, :]) / eps
    lv = -_bracket(diff) ** p
    mx = lv.max(axis=1, keepdims=True)
    return mx[:, 0] + np.log(np.mean(np.exp(lv - mx), axis=1)) - d * math.log(eps)


def growth_ratios(kind: str, params: dict, samples: int, seed: int = 0) -> np.ndarray:
    """Sampled values of ``|LHS| / weight`` for a growth lemma (see :func:`growth_bound_check`)."""
    rng = np.random.default_rng(seed)
    d = int(params.get("d", 1))
    if kind == "peetre":
        L = float(params.get("L", 10.0))
        x = rng.uniform(-L, L, size=(samples, d))
        y = rng.uniform(-L, L, size=(samples, d))
        p = rng.uniform(-5.0, 5.0, size=samples)
        return peetre_ratio(x, y, p)
    n_states = int(params.get("n_states", 10))
    N = int(params.get("N", 16))
    L = float(params.get("L", 10.0))
    eps = float(params["eps"])
    per = max(1, samples // n_states)
    out = []
    for ens in _random_ensembles(rng, n_states, N, d):
        pts = _sample_points(rng, per, d, L)
        if kind == "log_gauss":
            sigma = float(params["sigma"])
            p = float(params.get("p", 1.0))
            kern = MollifierKernel(KernelFamily.from_name(params.get("family", "polybump"), dim=d), eps)
            rho = kern.eval(pts[:, None, :] - ens[None, :, :]).mean(axis=1) if d == 2 else \
                kern.eval(pts[:, None, 0] - ens[None, :, 0]).mean(axis=1)
            lift = np.exp(-_bracket(pts) ** p)
            val = np.abs(np.log((1.0 - sigma) * rho + sigma * lift))
            out.append(val / (_bracket(pts) ** p * log_gauss_constant(sigma, kern.sup_norm)))
        elif kind == "log_global":
            p = float(params.get("p", 1.0))
            val = np.abs(_unnormalized_conv(pts, ens, eps, p))
            wgt = (_bracket(pts) / eps) ** p
            out.append(val / wgt)
        elif kind == "fast_power":
            m = float(params["m"])
            fam = KernelFamily.barenblatt(alpha=params.get("alpha"), m=m, dim=d)
            kern = MollifierKernel(fam, eps)
            diff = pts[:, None, :] - ens[None, :, :]
            rho = kern.eval(diff if d == 2 else diff[..., 0]).mean(axis=1)
            beta = 2.0 * fam.alpha * (1.0 - m)
            out.append(rho ** (m - 1.0) / (_bracket(pts) / eps) ** beta)
        else:
            raise InvalidParameterError(f"unknown growth check {kind!r}")
    return np.concatenate(out)


def derived_constant(kind: str, params: dict, seed: int = 0) -> float:
    """Explicit constant of a growth lemma, worst case over the sampled ensembles."""
    if kind in ("peetre", "log_gauss"):
        return 1.0  # ratios are already normalized by the explicit constant
    rng = np.random.default_rng(seed)
    d = int(params.get("d", 1))
    ens = _random_ensembles(rng, int(params.get("n_states", 10)), int(params.get("N", 16)), d)
    R = max(_half_mass_radius(e) for e in ens)
    eps = float(params["eps"])
    if eps > 1:
        raise InvalidParameterError("the growth lemmas are stated for eps <= 1")
    if kind == "log_global":
        return log_global_constant(float(params.get("p", 1.0)), R, d)
    if kind == "fast_power":
        m = float(params["m"])
        fam = KernelFamily.barenblatt(alpha=params.get("alpha"), m=m, dim=d)
        return fast_power_constant(MollifierKernel(fam, eps), m, R)
    raise InvalidParameterError(f"unknown growth check {kind!r}")


def growth_bound_check(kind: str, params: dict, samples: int, seed: int = 0,
                       constant: float | None = None) -> CheckResult:
    """Sampled check of a growth lemma.

    ``peetre`` and ``log_gauss`` are normalized by their explicit constants
    and pass iff the maximal ratio is ``<= 1 + 1e-9``.  ``log_global`` and
    ``fast_power`` report ``max |LHS| / (<x>/eps)^p``; they pass iff it does
    not exceed ``constant`` (a frozen calibrated value) or, when none is
    given, the explicit constant derived for the sampled ensembles.
    """
    ratios = growth_ratios(kind, params, samples, seed)
    mx = float(np.max(ratios))
    if kind in ("peetre", "log_gauss"):
        return CheckResult(kind, mx <= 1.0 + 1e-9, mx, 1.0, ratios.size)
    c = derived_constant(kind, params, seed) if constant is None else float(constant)
    return CheckResult(kind, mx <= c * (1.0 + 1e-9), mx, c, ratios.size)


def calibrate_constant(kind: str, params: dict, samples: int, seed: int = 0, margin: float = 2.0) -> float:
    """Pilot-run calibration: ``margin`` times the maximal sampled ratio."""
    return margin * float(np.max(growth_ratios(kind, params, samples, seed)))


# -- rate fitting ------------------------------------------------------------

@dataclass(frozen=True)
class ErrorSeries:
    parameter: tuple
    error: tuple
    label: str = "epsilon"

    def __post_init__(self):
        p = np.asarray(self.parameter, dtype=float)
        if p.size != len(self.error):
            raise InvalidParameterError("parameter and error lengths differ")
        dp = np.diff(p)
        if not (np.all(dp > 0) or np.all(dp < 0)):
            raise InvalidParameterError("parameter values must be strictly monotone")
        if self.label not in ("epsilon", "N", "tau", "dt"):
            raise InvalidParameterError(f"unknown parameter label {self.label!r}")


def rate_fit(series) -> tuple:
    """Least-squares slope of ``log(error)`` against ``log(parameter)`` and its ``r^2``."""
    if isinstance(series, ErrorSeries):
        p, e = series.parameter, series.error
    else:
        p, e = series
    p = np.asarray(p, dtype=float)
    e = np.asarray(e, dtype=float)
    if p.size < 3:
        raise InvalidParameterError("rate_fit needs at least three points")
    if np.any(p <= 0) or np.any(e <= 0):
        raise InvalidParameterError("rate_fit needs positive parameters and errors")
    lx, ly = np.log(p), np.log(e)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)
