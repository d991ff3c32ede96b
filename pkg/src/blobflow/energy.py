"""Regularised entropies, fast-diffusion energies and convexity constants.

The mollified density of a particle ensemble is

    u(y) = (1 - sigma) (1/N) sum_j V_eps(y - x_j) + sigma N(y),

with ``N`` a unit-width exp-bracket lift.  Energies are integrated on the
composite grids of :func:`blobflow.quadrature.particle_rule`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _pairs
from .errors import EvaluationError, InvalidParameterError
from .kernels import KernelFamily, MollifierKernel, unit_tail_radius
from .model import ParticleState, ProblemSpec
from .quadrature import QuadSettings, QuadratureRule, particle_rule

ENERGY_KINDS = ("H", "H_eps", "H_eps_sigma", "Um", "Um_eps")


def _positions(state) -> np.ndarray:
    if isinstance(state, ParticleState):
        return state.positions
    x = np.asarray(state, dtype=float)
    return x[:, None] if x.ndim == 1 else x


@dataclass(frozen=True)
class MixtureDensity:
    """Mollified empirical measure, optionally mixed with a lift density."""

    positions: np.ndarray
    kernel: MollifierKernel
    sigma: float = 0.0
    lift: KernelFamily | None = None

    def __post_init__(self):
        x = _positions(self.positions)
        if x.shape[1] != self.kernel.dim:
            raise InvalidParameterError("particle dimension does not match the kernel")
        object.__setattr__(self, "positions", np.ascontiguousarray(x))
        if not 0.0 <= self.sigma < 1.0:
            raise InvalidParameterError(f"sigma must lie in [0, 1), got {self.sigma}")
        if self.sigma > 0 and self.lift is None:
            object.__setattr__(self, "lift", KernelFamily.exp_bracket(1, dim=self.kernel.dim))

    @classmethod
    def from_spec(cls, state, spec: ProblemSpec) -> "MixtureDensity":
        return cls(_positions(state), spec.kernel, spec.sigma if spec.equation == "heat" else 0.0, spec.lift)

    @property
    def dim(self) -> int:
        return self.kernel.dim

    def _nodes(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.dim == 1:
            return np.ascontiguousarray(y.reshape(-1, 1))
        return np.ascontiguousarray(y.reshape(-1, 2))

    def blob(self, y) -> np.ndarray:
        """``(1/N) sum_j V_eps(y - x_j)`` without the ``1 - sigma`` weight."""
        y = np.asarray(y, dtype=float)
        shape = y.shape if self.dim == 1 else y.shape[:-1]
        k = self.kernel
        v = _pairs.mixture(self._nodes(y), self.positions, _pairs.family_code(k.family),
                           _pairs.family_param(k.family), k.epsilon, k.norm_const)
        return v.reshape(shape)

    def lift_density(self, y) -> np.ndarray:
        """``sigma N(y)``; zero when there is no lift."""
        y = np.asarray(y, dtype=float)
        if self.sigma == 0.0:
            return np.zeros(y.shape if self.dim == 1 else y.shape[:-1])
        return self.sigma * MollifierKernel(self.lift, 1.0).eval(y)

    def __call__(self, y):
        return self.eval(y)

    def eval(self, y) -> np.ndarray:
        return (1.0 - self.sigma) * self.blob(y) + self.lift_density(y)

    def log_eval(self, y) -> np.ndarray:
        """``log u(y)``; nodes where the blob sum underflows are redone in log space."""
        y = np.asarray(y, dtype=float)
        u = self.eval(y)
        with np.errstate(divide="ignore"):
            out = np.log(u)
        small = u < 1e-250
        if self.sigma == 0.0 and np.any(small):
            k = self.kernel
            nodes = self._nodes(y)[small.ravel()]
            out[small] = _pairs.log_mixture(np.ascontiguousarray(nodes), self.positions,
                                            _pairs.family_code(k.family), _pairs.family_param(k.family),
                                            k.epsilon, k.norm_const)
        return out


@dataclass(frozen=True)
class EnergyReport:
    value: float
    kind: str
    second_moment: float


def second_moment(state) -> float:
    """``(1/N) sum_i |x_i|^2``."""
    x = _positions(state)
    return float(np.mean(np.sum(x * x, axis=1)))


def lift_entropy(lift: KernelFamily) -> float:
    """``C_N = int N log N`` of the unit-width lift."""
    return MollifierKernel(lift, 1.0).entropy()


def energy_rule(mix: MixtureDensity, integrand: str, settings: QuadSettings, m: float = 1.0) -> QuadratureRule:
    """Quadrature grid for ``int u log u`` (``integrand="entropy"``) or ``int u^m`` (``"power"``)."""
    k = mix.kernel
    reach = 0.0 if k.compact else k.epsilon * unit_tail_radius(k.family, integrand, settings.tail_tol, m)
    return particle_rule(mix.positions, k, settings, reach, n=settings.n_energy)


def _xlogx(u):
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = u[pos] * np.log(u[pos])
    return out


def _check_finite(vals, rule):
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"non-finite energy integrand at node {rule.nodes[i]}", location=rule.nodes[i])


def entropy_regularized(mix: MixtureDensity, settings: QuadSettings | None = None) -> float:
    """``int u log u`` for the mixture (``H_eps_sigma``; ``H_eps`` when ``sigma = 0``).

    With a lift the integrand is split as ``(u log u - s log s) + s log s``,
    ``s = sigma N``.  The first part is carried by the particle blobs and is
    integrated on the particle grid; the second equals
    ``sigma log sigma + sigma C_N`` exactly.
    """
    settings = settings or QuadSettings()
    rule = energy_rule(mix, "entropy", settings)
    y = rule.nodes
    u = mix.eval(y)
    vals = _xlogx(u)
    const = 0.0
    if mix.sigma > 0:
        vals = vals - _xlogx(mix.lift_density(y))
        const = mix.sigma * math.log(mix.sigma) + mix.sigma * lift_entropy(mix.lift)
    _check_finite(vals, rule)
    return float(np.dot(rule.weights, vals)) + const


def fast_energy(mix: MixtureDensity, m: float, settings: QuadSettings | None = None) -> float:
    """``U^m_eps = -1/(1-m) int u^m`` of the mollified measure (no lift)."""
    d = mix.dim
    if not d / (d + 2) < m < 1:
        raise InvalidParameterError(f"m must lie in ({d}/{d + 2}, 1), got {m}")
    if mix.sigma != 0.0:
        raise InvalidParameterError("the fast-diffusion energy takes no lift")
    settings = settings or QuadSettings()
    rule = energy_rule(mix, "power", settings, m)
    u = mix.eval(rule.nodes)
    vals = np.where(u > 0, np.maximum(u, 0.0) ** m, 0.0)
    _check_finite(vals, rule)
    return -float(np.dot(rule.weights, vals)) / (1.0 - m)


def energy(state, spec: ProblemSpec) -> float:
    """The energy whose gradient flow ``spec`` describes."""
    mix = MixtureDensity.from_spec(state, spec)
    if spec.equation == "heat":
        e = entropy_regularized(mix, spec.quad)
        if spec.potential.active:
            e += float(np.mean(spec.potential.value(_positions(state))))
        return e
    return fast_energy(mix, spec.m, spec.quad)


def energy_report(state, spec: ProblemSpec) -> EnergyReport:
    if spec.equation == "heat":
        kind = "H_eps_sigma" if spec.sigma > 0 else "H_eps"
    else:
        kind = "Um_eps"
    return EnergyReport(energy(state, spec), kind, second_moment(state))


def grid_entropy(values, h: float) -> float:
    """``int rho log rho`` of a grid density with the convention ``0 log 0 = 0``."""
    return float(h * np.sum(_xlogx(np.asarray(values, dtype=float))))


def grid_power_energy(values, h: float, m: float) -> float:
    """``-1/(1-m) int rho^m`` of a grid density."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, None)
    return -float(h * np.sum(v**m)) / (1.0 - m)


def lambda_constant(spec: ProblemSpec, R0: float, R1: float, c_r: float = 1.0) -> float:
    """Convexity modulus of the regularised energy on supports of radii ``R0``, ``R1``.

    All unquantified prefactors are set to one, so the value is an
    order-of-magnitude diagnostic.

    * heat, ``sigma > 0``: ``-eps^-2 (|log sigma| + d |log eps| + log ||V_1||_inf) (1 - sigma) (1 + R0 + R1)``
    * heat, ``sigma = 0``: ``-eps^-3 c_r (1 + R0 + R1)``
    * fast diffusion: ``-eps^-3 c_r (1 + R0 + R1)``

    ``c_r`` stands for the tightness constant of the global-kernel cases.
    """
    if not (R0 > 0 and R1 > 0):
        raise InvalidParameterError("support radii must be positive")
    eps = spec.epsilon
    d = spec.dim
    spread = 1.0 + R0 + R1
    if spec.equation == "heat" and spec.sigma > 0:
        sup1 = MollifierKernel(spec.kernel.family, 1.0).sup_norm
        c = abs(math.log(spec.sigma)) + d * abs(math.log(eps)) + math.log(sup1)
        return -(eps**-2) * c * (1.0 - spec.sigma) * spread
    return -(eps**-3) * c_r * spread
