"""Exact solutions, quantile discretizations and a 1-D JKO solver.

The closed-form densities serve as oracles for the particle runs:

* heat kernel (Gaussian with variance ``s0^2 + 2t`` per axis),
* Ornstein-Uhlenbeck flow, the Fokker-Planck equation with ``V = |x|^2/2``,
* the self-similar fast-diffusion (Barenblatt) profile.

The JKO solver works on quantile vectors, for which ``d_W^2`` is an exact
weighted Euclidean distance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import isotonic_regression

from .dynamics import velocity
from .energy import energy as particle_energy
from .errors import ConvergenceError, InvalidParameterError
from .model import ParticleState, ProblemSpec

log = logging.getLogger(__name__)


# -- closed-form solutions ---------------------------------------------------

def heat_exact(s0: float, t: float, x, d: int = 1):
    """Density of ``N(0, (s0^2 + 2t) I_d)`` at ``x`` (trailing axis for d = 2)."""
    if not s0 > 0 or t < 0:
        raise InvalidParameterError("need s0 > 0 and t >= 0")
    var = s0 * s0 + 2.0 * t
    x = np.asarray(x, dtype=float)
    r2 = x * x if d == 1 else np.sum(x * x, axis=-1)
    return np.exp(-0.5 * r2 / var) / (2.0 * math.pi * var) ** (d / 2)


def ou_exact(mu0: float, s0: float, t: float, x):
    """Fokker-Planck solution with ``V = x^2/2`` from ``N(mu0, s0^2)`` (d = 1)."""
    if not s0 > 0 or t < 0:
        raise InvalidParameterError("need s0 > 0 and t >= 0")
    mean = mu0 * math.exp(-t)
    var = 1.0 + (s0 * s0 - 1.0) * math.exp(-2.0 * t)
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * (x - mean) ** 2 / var) / math.sqrt(2.0 * math.pi * var)


def ou_moments(mu0: float, s0: float, t: float):
    """Mean and standard deviation of :func:`ou_exact`."""
    return mu0 * math.exp(-t), math.sqrt(1.0 + (s0 * s0 - 1.0) * math.exp(-2.0 * t))


def _barenblatt_params(m: float, d: int):
    if d not in (1, 2):
        raise InvalidParameterError(f"dimension must be 1 or 2, got {d}")
    if not d / (d + 2) < m < 1:
        raise InvalidParameterError(f"m must lie in ({d}/{d + 2}, 1), got {m}")
    a = d / (d * (m - 1.0) + 2.0)
    k = (1.0 - m) * a / (2.0 * d * m)
    return a, k, 1.0 / (1.0 - m)


def barenblatt_mass_constant(m: float, d: int = 1) -> float:
    """Constant ``C`` giving the Barenblatt profile unit mass.

    From ``int (C + k|z|^2)^-g dz = C^(d/2-g) k^(-d/2) pi^(d/2) Gamma(g - d/2) / Gamma(g)``.
    """
    _, k, g = _barenblatt_params(m, d)
    base = k ** (d / 2) * math.gamma(g) / (math.pi ** (d / 2) * math.gamma(g - d / 2))
    return base ** (1.0 / (d / 2 - g))


def barenblatt_fast(m: float, d: int, t: float, x, mass_const: float | None = None):
    """Self-similar solution ``t^-a (C + k |x t^(-a/d)|^2)^(-1/(1-m))`` of ``rho_t = Laplace rho^m``."""
    a, k, g = _barenblatt_params(m, d)
    if not t > 0:
        raise InvalidParameterError(f"t must be positive, got {t}")
    C = barenblatt_mass_constant(m, d) if mass_const is None else mass_const
    x = np.asarray(x, dtype=float)
    r2 = x * x if d == 1 else np.sum(x * x, axis=-1)
    return t ** (-a) * (C + k * r2 * t ** (-2.0 * a / d)) ** (-g)


def gibbs_density(potential, x, lo: float = -12.0, hi: float = 12.0, n: int = 24001):
    """Normalized ``exp(-V)`` in d = 1, normalization by a fine trapezoid sum."""
    grid = np.linspace(lo, hi, n)
    z = np.trapezoid(np.exp(-potential.value(grid[:, None])), grid)
    x = np.asarray(x, dtype=float)
    return np.exp(-potential.value(x[..., None])) / z


# -- grid densities and quantization ----------------------------------------

@dataclass(frozen=True)
class GridDensity1D:
    """Nonnegative density values on a uniform grid, normalized so ``h sum(values) = 1``."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise InvalidParameterError("grid and values must be 1-D arrays of equal length >= 2")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise InvalidParameterError("density values must be finite and nonnegative")
        h = np.diff(g)
        if np.any(h <= 0) or np.max(np.abs(h - h[0])) > 1e-9 * max(1.0, abs(h[0])):
            raise InvalidParameterError("grid must be uniform and increasing")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def mass(self) -> float:
        return self.h * float(np.sum(self.values))

    @classmethod
    def from_function(cls, f, lo: float, hi: float, n: int = 20001) -> "GridDensity1D":
        grid = np.linspace(lo, hi, n)
        vals = np.asarray(f(grid), dtype=float)
        total = (grid[1] - grid[0]) * vals.sum()
        if not total > 0:
            raise InvalidParameterError("density has zero total mass")
        return cls(grid, vals / total)

    def cdf(self) -> np.ndarray:
        """Trapezoid CDF at the grid nodes, rescaled to end at exactly one."""
        v = self.values
        F = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * self.h)])
        if not F[-1] > 0:
            raise InvalidParameterError("density has zero total mass")
        return F / F[-1]


def quantile_levels(N: int) -> np.ndarray:
    return (np.arange(N) + 0.5) / N


def quantize(density: GridDensity1D, N: int) -> ParticleState:
    """``N`` equal-mass particles at the ``(j - 1/2)/N`` quantiles of ``density``."""
    if int(N) != N or N < 1:
        raise InvalidParameterError(f"N must be a positive integer, got {N}")
    if not density.mass() > 0:
        raise InvalidParameterError("cannot quantize a density of zero mass")
    F = density.cdf()
    keep = np.concatenate([[True], np.diff(F) > 0])
    # keep the left end of every flat stretch so the inverse is well defined
    return ParticleState(np.interp(quantile_levels(N), F[keep], density.grid[keep]))


def heat_grid(s0: float, t: float, n: int = 40001, width: float = 12.0) -> GridDensity1D:
    s = math.sqrt(s0 * s0 + 2 * t)
    return GridDensity1D.from_function(lambda x: heat_exact(s0, t, x), -width * s, width * s, n)


def barenblatt_grid(m: float, t: float, n: int = 400001, width: float = 2000.0) -> GridDensity1D:
    """Fine grid of the 1-D Barenblatt profile; its tail outside ``[-width, width]`` is dropped."""
    return GridDensity1D.from_function(lambda x: barenblatt_fast(m, 1, t, x), -width, width, n)


# -- JKO scheme ---------------------------------------------------------------

@dataclass(frozen=True)
class QuantileDiscretization:
    """Nondecreasing quantile vector representing ``(1/M) sum_j delta_{values[j]}``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size < 1 or not np.all(np.isfinite(v)):
            raise InvalidParameterError("quantile values must be finite and nonempty")
        if np.any(np.diff(v) < -1e-12 * max(1.0, float(np.max(np.abs(v))))):
            raise InvalidParameterError("quantile values must be nondecreasing")
        v = np.maximum.accumulate(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.size

    @classmethod
    def from_state(cls, state: ParticleState) -> "QuantileDiscretization":
        return cls(np.sort(state.positions[:, 0]))

    def as_state(self, t: float = 0.0) -> ParticleState:
        return ParticleState(np.array(self.values), t)


class JKOEnergy:
    """Energy handle on quantile vectors built from a 1-D problem.

    ``value(q)`` is the energy of the empirical measure and ``scaled_grad(q)``
    is ``M`` times its Euclidean gradient, i.e. minus the gradient-flow
    velocity (``1 - sigma`` factor included).
    """

    def __init__(self, spec: ProblemSpec):
        if spec.dim != 1:
            raise InvalidParameterError("the JKO solver is one-dimensional")
        self.spec = replace(spec, apply_sigma_factor=True) if spec.equation == "heat" else spec

    def value(self, q) -> float:
        return particle_energy(np.asarray(q, dtype=float), self.spec)

    def scaled_grad(self, q) -> np.ndarray:
        return -velocity(np.asarray(q, dtype=float), self.spec)[:, 0]


class ZeroEnergy:
    """``E = 0``: the JKO step reduces to the proximal identity."""

    def value(self, q) -> float:
        return 0.0

    def scaled_grad(self, q) -> np.ndarray:
        return np.zeros(np.asarray(q).shape)


@dataclass
class JKOStepInfo:
    iterations: int
    objective: float
    energy: float
    w2_increment: float


def _project(v):
    return isotonic_regression(v, increasing=True).x


def jko_step(q: QuantileDiscretization, tau: float, energy, tol: float = 1e-10,
             max_iter: int = 5000, return_info: bool = False):
    """Approximate minimizer of ``|q' - q|^2 / (2 tau M) + E[q']`` over nondecreasing ``q'``.

    Projected gradient descent (Barzilai-Borwein step, Armijo backtracking,
    isotonic projection).  Stops once an accepted iterate lowers the
    objective by less than ``tol``.  The returned iterate never has a larger
    objective than the starting point ``q' = q``.
    """
    if not tau > 0:
        raise InvalidParameterError(f"tau must be positive, got {tau}")
    q0 = np.array(q.values)
    M = q0.size

    def objective(v):
        e = energy.value(v)
        return float(np.sum((v - q0) ** 2)) / (2.0 * tau * M) + e, e

    def grad(v):
        return (v - q0) / tau + energy.scaled_grad(v)

    x = q0.copy()
    phi, e_x = objective(x)
    g = grad(x)
    phi_start = phi
    # explicit-Euler warm start, kept only if it lowers the objective
    trial = _project(q0 - tau * energy.scaled_grad(q0))
    phi_t, e_t = objective(trial)
    if phi_t < phi:
        x, phi, e_x = trial, phi_t, e_t
        g = grad(x)
    s = tau
    for it in range(1, max_iter + 1):
        if not np.any(g):
            break
        accepted = False
        for _ in range(60):
            xn = _project(x - s * g)
            dx = xn - x
            if not np.any(dx):
                break
            phin, e_n = objective(xn)
            if phin <= phi + 1e-4 * float(np.dot(g, dx)) / M:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
        gn = grad(xn)
        dg = gn - g
        decrease = phi - phin
        x, phi, e_x, g = xn, phin, e_n, gn
        if decrease < tol:
            break
        curv = float(np.dot(dx, dg))
        s = float(np.dot(dx, dx)) / curv if curv > 0 else 2.0 * s
        s = min(max(s, 1e-6 * tau), 1e3 * tau)
    else:
        raise ConvergenceError(f"JKO step did not converge in {max_iter} iterations",
                               last_iterate=QuantileDiscretization(x), gap=float(phi_start - phi))
    out = QuantileDiscretization(x)
    if return_info:
        w2 = math.sqrt(float(np.mean((x - q0) ** 2)))
        return out, JKOStepInfo(it, phi, e_x, w2)
    return out


@dataclass
class JKOResult:
    tau: float
    iterates: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    w2_increments: list = field(default_factory=list)

    def interpolant(self, t: float) -> QuantileDiscretization:
        """Piecewise-constant interpolant: ``q_n`` on ``((n-1) tau, n tau]``."""
        n = int(math.ceil(t / self.tau - 1e-9))
        n = min(max(n, 0), len(self.iterates) - 1)
        return self.iterates[n]

    def rows(self):
        return [(n, self.energies[n], self.w2_increments[n]) for n in range(len(self.iterates))]


def jko_solve(q0: QuantileDiscretization, tau: float, n_steps: int, energy, tol: float = 1e-10,
              max_iter: int = 5000) -> JKOResult:
    """Iterate :func:`jko_step`, asserting the energy certificate at every step.

    Each step satisfies ``E[q_n] + d_W(q_n, q_{n-1})^2 / (2 tau) <= E[q_{n-1}]``
    (up to a round-off slack), so the energy sequence is non-increasing.
    """
    res = JKOResult(tau)
    res.iterates.append(q0)
    res.energies.append(energy.value(q0.values))
    res.w2_increments.append(0.0)
    q = q0
    for n in range(1, n_steps + 1):
        q, info = jko_step(q, tau, energy, tol=tol, max_iter=max_iter, return_info=True)
        prev = res.energies[-1]
        slack = 1e-12 * max(1.0, abs(prev))
        if not info.energy + info.w2_increment**2 / (2 * tau) <= prev + slack:
            raise ConvergenceError(f"JKO step {n} violated the energy certificate",
                                   last_iterate=q, gap=info.energy - prev)
        log.debug("jko step %d: %d iterations, energy %.12g", n, info.iterations, info.energy)
        res.iterates.append(q)
        res.energies.append(info.energy)
        res.w2_increments.append(info.w2_increment)
    return res
