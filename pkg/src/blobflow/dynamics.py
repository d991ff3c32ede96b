"""Particle ODE systems for the regularised heat and fast-diffusion flows.

Heat (mixture ``u = (1 - sigma) rho_eps + sigma N``)::

    dx_i/dt = -int grad V_eps(x_i - y) log u(y) dy  [- grad V_ext(x_i)]

Fast diffusion (``u = rho_eps``)::

    dx_i/dt = m/(1-m) int grad V_eps(x_i - y) u(y)^(m-1) dy

Both are gradient flows: the heat energy decays at the rate
``(1 - sigma)/N sum |w_i|^2`` and the fast-diffusion energy at ``1/N sum |w_i|^2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _pairs
from .energy import MixtureDensity, energy, second_moment
from .errors import BlowUpError, EvaluationError, InvalidParameterError
from .kernels import MollifierKernel, unit_radius
from .model import ExternalPotential, ParticleState, ProblemSpec
from .quadrature import particle_rule

__all__ = [
    "ExternalPotential", "ParticleState", "ProblemSpec", "SupportBoundWarning", "Trajectory",
    "dt_max", "fast_bound_constant", "fast_velocity_bound", "scaling_schedule", "simulate", "step", "support_growth_rate",
    "velocity", "velocity_fast", "velocity_heat",
]

METHODS = ("euler", "rk4")


class SupportBoundWarning(UserWarning):
    """Measured support radius exceeded its unit-prefactor exponential bound."""


def _pair_args(kernel: MollifierKernel):
    return _pairs.family_code(kernel.family), _pairs.family_param(kernel.family), kernel.epsilon, kernel.norm_const


def _grad_sum(x, rule, g, kernel):
    """``sum_k w_k g_k grad V_eps(x_i - y_k)`` for all particles."""
    y = rule.nodes.reshape(rule.size, -1)
    return _pairs.velocity(np.ascontiguousarray(x), np.ascontiguousarray(y),
                           np.ascontiguousarray(rule.weights * g), *_pair_args(kernel))


def velocity_reach(spec: ProblemSpec) -> float:
    """Distance beyond the particle hull covered by the velocity grid (absolute units)."""
    k = spec.kernel
    if k.compact:
        return 0.0
    tol = spec.quad.tail_tol
    if spec.equation == "heat":
        return k.epsilon * unit_radius(k.family, 1.0, tol)
    if k.family.kind == "barenblatt":
        return k.epsilon * unit_radius(k.family, spec.beta, tol)
    # exp kernels: u^(m-1) grows like exp((1-m)|y|/eps), the integrand decays like exp(-m|y|/eps)
    return k.epsilon * unit_radius(k.family, 0.0, tol) / spec.m


def velocity_heat(state, spec: ProblemSpec) -> np.ndarray:
    """Heat-flow particle velocities, shape ``(N, d)``."""
    if spec.equation != "heat":
        raise InvalidParameterError("velocity_heat needs a heat problem")
    x = _as_positions(state)
    mix = MixtureDensity(x, spec.kernel, spec.sigma, spec.lift)
    rule = particle_rule(x, spec.kernel, spec.quad, velocity_reach(spec))
    logu = mix.log_eval(rule.nodes)
    if not np.all(np.isfinite(logu)):
        i = int(np.flatnonzero(~np.isfinite(logu))[0])
        raise EvaluationError(f"log u is not finite at node {rule.nodes[i]}", location=rule.nodes[i])
    w = -_grad_sum(x, rule, logu, spec.kernel)
    if spec.apply_sigma_factor:
        w *= 1.0 - spec.sigma
    if spec.potential.active:
        w -= spec.potential.grad(x)
    return w


def velocity_fast(state, spec: ProblemSpec) -> np.ndarray:
    """Fast-diffusion particle velocities, shape ``(N, d)``."""
    if spec.equation != "fast":
        raise InvalidParameterError("velocity_fast needs a fast-diffusion problem")
    x = _as_positions(state)
    m = spec.m
    mix = MixtureDensity(x, spec.kernel, 0.0)
    rule = particle_rule(x, spec.kernel, spec.quad, velocity_reach(spec))
    logu = mix.log_eval(rule.nodes)
    if not np.all(np.isfinite(logu)):
        i = int(np.flatnonzero(~np.isfinite(logu))[0])
        raise EvaluationError(f"mollified density vanishes at node {rule.nodes[i]}", location=rule.nodes[i])
    return (m / (1.0 - m)) * _grad_sum(x, rule, np.exp((m - 1.0) * logu), spec.kernel)


def velocity(state, spec: ProblemSpec) -> np.ndarray:
    return velocity_heat(state, spec) if spec.equation == "heat" else velocity_fast(state, spec)


def _as_positions(state) -> np.ndarray:
    if isinstance(state, ParticleState):
        return state.positions
    x = np.asarray(state, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def half_mass_radius(x) -> float:
    """Smallest particle radius ``R`` with at least half of the particles in ``B_R``."""
    r = np.sort(np.sqrt(np.sum(np.asarray(x) ** 2, axis=1)))
    return float(r[(r.size + 1) // 2 - 1])


def fast_bound_constant(state, spec: ProblemSpec) -> float:
    """Constant ``C`` of the growth bound ``|w(x)| <= C (<x>/eps)^beta`` (Barenblatt kernel, eps <= 1).

    With ``R`` the half-mass radius, ``<(x - y)/eps>^2 <= (2/eps^2) <x>^2 <R>^2`` for
    ``|y| <= R`` gives the lower bound ``u(y) >= (c/2) eps^-d (2 <R>^2)^-alpha (<y>/eps)^-2alpha``.
    Peetre's inequality and ``<z> <= <z/eps>`` then yield
    ``C = m/(1-m) [(c/2) (2 <R>^2)^-alpha]^(m-1) eps^(d(1-m)) 2^(beta/2) G_beta / eps``
    with ``G_beta = int |grad V_1| <w>^beta``.
    """
    if spec.equation != "fast" or spec.kernel.family.kind != "barenblatt":
        raise InvalidParameterError("the fast growth bound is stated for the Barenblatt kernel")
    if spec.epsilon > 1:
        raise InvalidParameterError("the fast growth bound needs eps <= 1")
    k = spec.kernel
    d, m, eps = spec.dim, spec.m, k.epsilon
    beta = spec.beta
    R = half_mass_radius(_as_positions(state))
    c_b = (0.5 * k.norm_const * (2.0 * (1.0 + R * R)) ** (-k.family.alpha)) ** (m - 1.0)
    g_beta = _unit_gradient_moment(k.family, beta)
    return (m / (1.0 - m)) * c_b * eps ** (d * (1.0 - m)) * 2.0 ** (beta / 2) * g_beta / eps


def fast_velocity_bound(state, spec: ProblemSpec) -> np.ndarray:
    """Pointwise bound ``C (<x_i>/eps)^beta`` on the fast-diffusion speed of every particle."""
    x = _as_positions(state)
    br = np.sqrt(1.0 + np.sum(x * x, axis=1)) / spec.epsilon
    return fast_bound_constant(x, spec) * br**spec.beta


_GB_CACHE: dict = {}


def _unit_gradient_moment(family, beta: float) -> float:
    key = (family, beta)
    if key not in _GB_CACHE:
        _GB_CACHE[key] = MollifierKernel(family, 1.0).grad_weighted_tail(0.0, beta)
    return _GB_CACHE[key]


def support_growth_rate(spec: ProblemSpec, state=None) -> float:
    """Rate ``C`` of the support bound ``<R(t)> <= <R(0)> e^(C t)`` with unit prefactors.

    * heat with ``sigma > 0``: ``eps^-1 (|log sigma| + d |log eps| + 1)`` (linear velocity growth)
    * heat with ``sigma = 0``: ``kappa / eps`` with ``kappa >= sup |grad V_1| / V_1``
      (1 for exp1, alpha for Barenblatt, 2 for exp2 as a unit-prefactor choice)
    * fast diffusion (Barenblatt): the growth-bound constant times ``eps^-beta``
    """
    eps, d = spec.epsilon, spec.dim
    if spec.equation == "heat":
        if spec.sigma > 0:
            rate = (abs(math.log(spec.sigma)) + d * abs(math.log(eps)) + 1.0) / eps
        else:
            fam = spec.kernel.family
            kappa = {"exp1": 1.0, "exp2": 2.0}.get(fam.name, fam.alpha)
            rate = kappa / eps
        if spec.potential.kind == "quadratic":
            rate += 1.0
        return rate
    if state is None or spec.kernel.family.kind != "barenblatt" or spec.epsilon > 1:
        return math.inf
    # d<x>/dt <= C eps^-beta <x>^beta <= C eps^-beta <x> when beta <= 1
    return float(fast_bound_constant(state, spec) * spec.epsilon ** (-spec.beta))


def dt_max(spec: ProblemSpec, c_stab: float = 0.1) -> float:
    """Explicit-stability step limit ``c_stab * eps^2``."""
    return c_stab * spec.epsilon**2


def _check_finite(x, t):
    bad = ~np.all(np.isfinite(x), axis=1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise BlowUpError(f"particle {i} became non-finite at t = {t:.6g}", particle=i, time=t)


def step(state: ParticleState, spec: ProblemSpec, dt: float, method: str = "rk4") -> ParticleState:
    """One explicit Euler or classical RK4 step."""
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    x = state.positions
    if method == "euler":
        xn = x + dt * velocity(x, spec)
    elif method == "rk4":
        k1 = velocity(x, spec)
        k2 = velocity(x + 0.5 * dt * k1, spec)
        k3 = velocity(x + 0.5 * dt * k2, spec)
        k4 = velocity(x + dt * k3, spec)
        xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise InvalidParameterError(f"unknown time-stepping method {method!r}; expected one of {METHODS}")
    t = state.time + dt
    _check_finite(xn, t)
    return ParticleState(xn, t)


REPORT_COLUMNS = ("t", "H_eps_sigma", "Um_eps", "m2", "support_radius", "max_speed",
                  "support_bound", "energy", "growth_ratio")


@dataclass
class Trajectory:
    """Snapshots of a particle run with one report row per snapshot."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    report: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def append(self, state: ParticleState, row: dict):
        if self.times and not state.time > self.times[-1]:
            raise InvalidParameterError("trajectory times must be strictly increasing")
        self.times.append(state.time)
        self.states.append(state)
        self.report.append(row)

    @property
    def final(self) -> ParticleState:
        return self.states[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.report], dtype=float)

    def state_at(self, t: float, atol: float = 1e-9) -> ParticleState:
        for s in self.states:
            if abs(s.time - t) <= atol:
                return s
        raise KeyError(f"no snapshot at t = {t}")


def _report_row(state, spec, w, r0, rate, n_com, elapsed):
    e = energy(state, spec)
    radius = state.max_radius()
    speed = np.sqrt(np.sum(w * w, axis=1))
    growth = rate * elapsed
    bound = math.sqrt(1.0 + r0**2) * math.exp(growth) if growth < 700.0 else math.inf
    row = {
        "t": state.time,
        "H_eps_sigma": e if spec.equation == "heat" else math.nan,
        "Um_eps": e if spec.equation == "fast" else math.nan,
        "m2": second_moment(state),
        "support_radius": radius,
        "max_speed": float(speed.max()),
        "support_bound": bound,
        "energy": e,
        "growth_ratio": math.nan,
    }
    if spec.equation == "fast" and spec.kernel.family.kind == "barenblatt" and spec.epsilon <= 1:
        row["growth_ratio"] = float(np.max(speed / fast_velocity_bound(state, spec)))
    com = state.center_of_mass()
    for a in range(n_com):
        row[f"com{a}"] = float(com[a])
    return row


def simulate(spec: ProblemSpec, init: ParticleState, T: float, dt: float, snapshot_every: int = 1,
             method: str = "rk4", c_stab: float = 0.1, callback=None) -> Trajectory:
    """Integrate the particle ODE on ``[init.time, init.time + T]``.

    ``dt`` must not exceed :func:`dt_max`; it is shrunk so that an integer
    number of steps lands exactly on ``T``.  A report row is written at the
    initial state and after every ``snapshot_every`` steps (and at the end).
    Support-bound violations raise :class:`SupportBoundWarning`, non-finite
    positions raise :class:`BlowUpError`.
    """
    if not T > 0:
        raise InvalidParameterError(f"T must be positive, got {T}")
    limit = dt_max(spec, c_stab)
    if dt > limit * (1 + 1e-12):
        raise InvalidParameterError(f"dt = {dt:.6g} exceeds the stability limit {limit:.6g} = c_stab eps^2")
    if not dt > 0:
        raise InvalidParameterError(f"dt must be positive, got {dt}")
    if int(snapshot_every) != snapshot_every or snapshot_every < 1:
        raise InvalidParameterError("snapshot_every must be a positive integer")
    if init.dim != spec.dim:
        raise InvalidParameterError("initial state dimension does not match the kernel")
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    t0 = init.time
    traj = Trajectory()
    r0 = init.max_radius()
    rate = support_growth_rate(spec, init)
    state = init
    traj.append(state, _report_row(state, spec, velocity(state, spec), r0, rate, spec.dim, 0.0))
    for n in range(1, n_steps + 1):
        state = step(state, spec, dt, method)
        state = ParticleState(state.positions, t0 + n * dt)
        if callback is not None:
            callback(state)
        if n % snapshot_every == 0 or n == n_steps:
            row = _report_row(state, spec, velocity(state, spec), r0, rate, spec.dim, n * dt)
            traj.append(state, row)
            if math.sqrt(1.0 + row["support_radius"] ** 2) > row["support_bound"]:
                msg = (f"support radius {row['support_radius']:.6g} exceeds bound "
                       f"{row['support_bound']:.6g} at t = {state.time:.6g}")
                traj.warnings.append(msg)
                warnings.warn(msg, SupportBoundWarning, stacklevel=2)
    return traj


def scaling_schedule(kind: str, gamma: float, N: int):
    """Kernel width (and lift weight) tied to the particle number.

    ``heat_compact``: ``eps = (log log N)^-gamma``, ``sigma = eps``, ``gamma in (0, 1)``.
    ``heat_global``:  ``eps = (log N)^-gamma``, ``sigma = 0``, ``gamma in (0, 1/4)``.
    ``fast``:         ``eps = (log log N)^-gamma``, ``sigma = 0``, ``gamma in (0, 1/2)``.
    """
    ranges = {"heat_compact": 1.0, "heat_global": 0.25, "fast": 0.5}
    if kind not in ranges:
        raise InvalidParameterError(f"unknown schedule {kind!r}; expected one of {tuple(ranges)}")
    if not 0.0 < gamma < ranges[kind]:
        raise InvalidParameterError(f"gamma = {gamma} outside (0, {ranges[kind]}) for {kind}")
    if kind == "heat_global":
        if not N > 1:
            raise InvalidParameterError("heat_global schedule needs N > 1")
        eps = math.log(N) ** (-gamma)
        return eps, 0.0
    if not math.log(N) > 1:
        raise InvalidParameterError("log log N must be positive (N > e)")
    eps = math.log(math.log(N)) ** (-gamma)
    return eps, (eps if kind == "heat_compact" else 0.0)
