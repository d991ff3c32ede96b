import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from blobflow.dynamics import (SupportBoundWarning, dt_max, fast_velocity_bound, scaling_schedule, simulate, step,
                               velocity, velocity_fast, velocity_heat)
from blobflow.energy import MixtureDensity
from blobflow.errors import BlowUpError, InvalidParameterError
from blobflow.kernels import KernelFamily, MollifierKernel
from blobflow.model import ExternalPotential, ParticleState, ProblemSpec
from blobflow.quadrature import QuadSettings

EXP1 = KernelFamily.exp_bracket(1)
POLY = KernelFamily.polybump()
BAREN = KernelFamily.barenblatt(m=0.8)


def heat(eps=0.5, sigma=0.0, fam=EXP1, **kw):
    return ProblemSpec("heat", MollifierKernel(fam, eps), sigma=sigma, **kw)


def fast(eps=0.5, m=0.8):
    return ProblemSpec("fast", MollifierKernel(KernelFamily.barenblatt(m=m), eps), m=m)


def _oracle(x, spec, g):
    """``int grad V_eps(x_i - y) g(u(y)) dy`` by adaptive quadrature, one particle at a time."""
    mix = MixtureDensity.from_spec(x, spec)
    k = spec.kernel
    out = []
    eps = k.epsilon
    half = eps if k.compact else 40.0
    for xi in x[:, 0]:
        f = lambda y: float(k.grad(xi - y) * g(mix.eval(np.array([y]))[0]))  # noqa: E731
        lo, hi = xi - half, xi + half
        pts = sorted({float(p) for c in x[:, 0] for p in (c - eps, c, c + eps) if lo < p < hi})
        val = integrate.quad(f, lo, hi, points=pts, limit=400, epsabs=1e-13, epsrel=1e-12)[0]
        out.append(val)
    return np.array(out)


# -- velocities -----------------------------------------------------------------------

def test_single_particle_zero_velocity():
    assert np.all(np.abs(velocity_heat(np.zeros((1, 1)), heat())) < 1e-12)
    assert np.all(np.abs(velocity_fast(np.zeros((1, 1)), fast())) < 1e-12)


@given(a=st.floats(0.05, 3.0))
def test_mirror_antisymmetry(a):
    x = np.array([[-a], [a]])
    for spec in (heat(), heat(0.3, 0.2, POLY), fast()):
        v = velocity(x, spec)
        assert v[0, 0] == pytest.approx(-v[1, 0], rel=1e-9, abs=1e-12)


def test_heat_two_particles_oracle():
    x = np.array([[-0.5], [0.5]])
    spec = heat(0.5)
    v = velocity_heat(x, spec)
    ref = -_oracle(x, spec, math.log)
    assert v[1, 0] > 0
    np.testing.assert_allclose(v[:, 0], ref, rtol=1e-7, atol=1e-9)


def test_fast_two_particles_oracle():
    x = np.array([[-0.5], [0.5]])
    spec = fast(0.5)
    v = velocity_fast(x, spec)
    ref = 0.8 / 0.2 * _oracle(x, spec, lambda u: u ** (0.8 - 1))
    assert v[1, 0] > 0 and v[0, 0] < 0
    np.testing.assert_allclose(v[:, 0], ref, rtol=1e-6)


def test_compact_heat_oracle():
    x = np.array([[-0.4], [0.1], [0.3]])
    spec = heat(0.3, 0.1, POLY)
    mix = MixtureDensity.from_spec(x, spec)
    grid = np.linspace(-0.7, 0.6, 400001)
    logu = np.log(mix.eval(grid))
    ref = np.array([-np.trapezoid(spec.kernel.grad(xi - grid) * logu, grid) for xi in x[:, 0]])
    fine = ProblemSpec("heat", spec.kernel, sigma=0.1, quad=QuadSettings(n=16, panel=0.25))
    np.testing.assert_allclose(velocity_heat(x, fine)[:, 0], ref, rtol=0, atol=1e-7)
    # default rule: error relative to the velocity scale
    err = np.max(np.abs(velocity_heat(x, spec)[:, 0] - ref)) / np.max(np.abs(ref))
    assert err < 1e-4


def test_sigma_factor_and_potential():
    x = np.array([[-0.4], [0.1], [0.9]])
    base = velocity_heat(x, heat(0.3, 0.2, POLY))
    scaled = velocity_heat(x, heat(0.3, 0.2, POLY, apply_sigma_factor=True))
    np.testing.assert_allclose(scaled, 0.8 * base, rtol=1e-14)
    pot = velocity_heat(x, heat(0.3, 0.2, POLY, potential=ExternalPotential("quadratic")))
    np.testing.assert_allclose(pot, base - x, rtol=1e-13, atol=1e-14)


def test_heat_speed_bound_c_over_eps(rng):
    x = np.sort(rng.normal(size=(12, 1)), axis=0)
    c = [np.max(np.abs(velocity_heat(x, heat(e)))) * e for e in (0.4, 0.2, 0.1)]
    # |w| <= C / eps with C = sup |grad V_1| / V_1 <= 1 for exp1
    assert max(c) <= 1.0 + 1e-9
    assert max(c) / min(c) < 3.0


def test_compact_linear_growth(rng):
    x = rng.normal(scale=2.0, size=(16, 1))
    for eps in (0.4, 0.2, 0.1):
        spec = heat(eps, 0.1, POLY)
        w = np.abs(velocity_heat(x, spec)[:, 0])
        c1 = (abs(math.log(0.1)) + abs(math.log(eps)) + 1) / eps
        assert np.max(w / np.sqrt(1 + x[:, 0] ** 2)) <= 5.0 * c1


def test_fast_velocity_bound_pointwise(rng):
    for eps in (0.5, 0.3):
        x = rng.normal(size=(10, 1))
        spec = fast(eps)
        w = np.abs(velocity_fast(x, spec)[:, 0])
        assert np.all(w <= fast_velocity_bound(x, spec))


# -- steppers ---------------------------------------------------------------------------

def test_step_zero_field():
    s = ParticleState(np.zeros((1, 1)))
    for method in ("euler", "rk4"):
        assert np.all(np.abs(step(s, heat(), 0.01, method).positions) < 1e-15)


def test_step_permutation_equivariance():
    s = ParticleState(np.array([-0.3, 0.1, 0.7, 1.5]))
    perm = [2, 0, 3, 1]
    spec = heat(0.4, 0.1, POLY)
    a = step(s.permuted(perm), spec, 0.01).positions
    b = step(s, spec, 0.01).positions[perm]
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


def _richardson_order(method, spec, s, T=0.4, dt=0.04):
    def run(h):
        state = s
        for _ in range(int(round(T / h))):
            state = step(state, spec, h, method)
        return state.positions[:, 0]

    e1 = np.max(np.abs(run(dt) - run(dt / 2)))
    e2 = np.max(np.abs(run(dt / 2) - run(dt / 4)))
    return math.log2(e1 / e2)


def test_richardson_orders():
    spec = heat(0.5, potential=ExternalPotential("quadratic"))
    s = ParticleState(np.array([-0.9, 0.2, 0.6]))
    assert _richardson_order("euler", spec, s) == pytest.approx(1.0, abs=0.15)
    assert _richardson_order("rk4", spec, s) == pytest.approx(4.0, abs=0.3)


def test_blow_up_error():
    spec = heat(0.5, potential=ExternalPotential("polynomial", (0.0, 0.0, 0.0, 0.0, -1e300)))
    with pytest.raises(BlowUpError) as exc, np.errstate(over="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        step(ParticleState(np.array([0.5, 1e3])), spec, 0.01, "euler")
    assert exc.value.particle == 1 and exc.value.time == pytest.approx(0.01)


# -- simulate ---------------------------------------------------------------------------

def test_center_of_mass_conserved_heat():
    s = ParticleState(np.array([-1.3, -0.4, -0.2, 0.1, 0.5, 0.6, 1.4, 2.2]))
    traj = simulate(heat(0.4), s, 0.3, 0.016)
    com = traj.column("com0")
    assert np.max(np.abs(com - com[0])) < 1e-9


def test_center_of_mass_conserved_fast():
    s = ParticleState(np.array([-1.3, -0.4, -0.2, 0.1, 0.5, 0.6, 1.4, 2.2]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SupportBoundWarning)
        traj = simulate(fast(0.4), s, 0.3, 0.016)
    com = traj.column("com0")
    assert np.max(np.abs(com - com[0])) < 1e-8
    assert np.all(np.diff(traj.column("Um_eps")) <= 1e-10)


@pytest.mark.parametrize("method", ["rk4", "euler"])
def test_heat_energy_dissipation(method):
    s = ParticleState(np.linspace(-1, 1, 12) ** 3)
    traj = simulate(heat(0.3, 0.1, POLY), s, 0.3, 0.009, snapshot_every=2, method=method)
    assert np.all(np.diff(traj.column("H_eps_sigma")) <= 1e-6)


def test_translation_equivariance():
    s = ParticleState(np.array([-0.8, -0.1, 0.3, 1.1]))
    # the lift is fixed in space, so translation equivariance holds for sigma = 0 only
    spec0 = heat(0.3)
    a = simulate(spec0, s, 0.1, 0.009).final.positions
    b = simulate(spec0, s.shifted(3.0), 0.1, 0.009).final.positions
    np.testing.assert_allclose(b, a + 3.0, atol=1e-9)


def test_mirror_symmetry_preserved():
    x = np.array([0.2, 0.5, 1.3])
    s = ParticleState(np.concatenate([-x, x]))
    f = simulate(heat(0.3, 0.1, POLY), s, 0.2, 0.009).final.x
    np.testing.assert_allclose(f[:3], -f[3:], atol=1e-9)


def test_dt_limit_and_snapshots():
    spec = heat(0.3)
    assert dt_max(spec) == pytest.approx(0.009)
    with pytest.raises(InvalidParameterError):
        simulate(spec, ParticleState(np.array([0.0, 1.0])), 0.1, 0.01)
    traj = simulate(spec, ParticleState(np.array([0.0, 1.0])), 0.1, 0.009, snapshot_every=3)
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(0.1)
    assert len(traj.times) == 1 + math.ceil(12 / 3)


def test_support_bound_warning_is_not_fatal():
    spec = heat(0.3)
    s = ParticleState(np.array([0.0, 1.0]))
    traj = simulate(spec, s, 0.05, 0.009)
    assert np.all(np.sqrt(1 + traj.column("support_radius") ** 2) <= traj.column("support_bound"))


# -- parameters ---------------------------------------------------------------------------

def test_problem_validation():
    with pytest.raises(InvalidParameterError):
        ProblemSpec("heat", MollifierKernel(POLY, 0.3))  # compact kernel needs sigma > 0
    with pytest.raises(InvalidParameterError):
        ProblemSpec("fast", MollifierKernel(BAREN, 0.3), m=1.2)
    with pytest.raises(InvalidParameterError):
        ProblemSpec("fast", MollifierKernel(KernelFamily.barenblatt(m=0.7), 0.3), m=0.7)  # m^2 + 2m - 2 <= 0
    with pytest.raises(InvalidParameterError):
        ProblemSpec("fast", MollifierKernel(POLY, 0.3), m=0.8)
    with pytest.raises(InvalidParameterError):
        ProblemSpec("fast", MollifierKernel(BAREN, 0.3), m=0.8, potential=ExternalPotential("quadratic"))
    # an explicit alpha above d/2 + 1/m lifts the restriction on m
    ProblemSpec("fast", MollifierKernel(KernelFamily.barenblatt(alpha=3.0), 0.3), m=0.7)


def test_scaling_schedule_examples():
    eps, sigma = scaling_schedule("heat_global", 0.2, math.exp(32))
    assert eps == pytest.approx(0.5, rel=1e-12) and sigma == 0.0
    eps, sigma = scaling_schedule("heat_compact", 0.5, math.exp(math.exp(4)))
    assert eps == pytest.approx(0.5, rel=1e-12) and sigma == pytest.approx(0.5, rel=1e-12)


@given(N=st.integers(20, 10**6), gamma=st.floats(0.01, 0.24))
def test_scaling_schedule_monotone(N, gamma):
    for kind in ("heat_compact", "heat_global", "fast"):
        assert scaling_schedule(kind, gamma, 2 * N)[0] < scaling_schedule(kind, gamma, N)[0]


def test_scaling_schedule_gamma_range():
    with pytest.raises(InvalidParameterError):
        scaling_schedule("heat_global", 0.3, 100)
    with pytest.raises(InvalidParameterError):
        scaling_schedule("fast", 0.6, 100)
    with pytest.raises(InvalidParameterError):
        scaling_schedule("heat_compact", 1.0, 100)
