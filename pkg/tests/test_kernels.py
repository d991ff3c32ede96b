import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from blobflow.errors import InvalidParameterError
from blobflow.kernels import KernelFamily, MollifierKernel, normalization_constant, peetre_rhs, unit_radius

FAMILIES_1D = [KernelFamily.polybump(), KernelFamily.exp_bracket(1), KernelFamily.exp_bracket(2),
               KernelFamily.barenblatt(m=0.8)]
FAMILIES_2D = [KernelFamily.polybump(dim=2), KernelFamily.exp_bracket(1, dim=2), KernelFamily.exp_bracket(2, dim=2),
               KernelFamily.barenblatt(m=0.8, dim=2)]
ALL = FAMILIES_1D + FAMILIES_2D


# -- normalization oracles ------------------------------------------------------

def test_polybump_constant_closed_form():
    assert normalization_constant(KernelFamily.polybump()) == pytest.approx(315 / 256, rel=1e-13)


def test_polybump_constant_vs_independent_quadrature():
    mass, _ = integrate.quad(lambda x: (1 - x * x) ** 4, -1, 1, epsabs=1e-14)
    assert normalization_constant(KernelFamily.polybump()) == pytest.approx(1 / mass, rel=1e-12)


@pytest.mark.parametrize("alpha", [1.5, 2.5, 4.0])
def test_barenblatt_constant_closed_form(alpha):
    c = special.gamma(alpha) / (math.sqrt(math.pi) * special.gamma(alpha - 0.5))
    assert normalization_constant(KernelFamily.barenblatt(alpha=alpha)) == pytest.approx(c, rel=1e-11)


def test_exp2_constant_gaussian_identity():
    Z = math.exp(-1) * math.sqrt(math.pi)
    assert 1 / normalization_constant(KernelFamily.exp_bracket(2)) == pytest.approx(Z, rel=1e-12)
    assert Z == pytest.approx(0.652049, abs=1e-6)


def test_exp1_constant_vs_independent_quadrature():
    Z, _ = integrate.quad(lambda x: 2 * math.exp(-math.sqrt(1 + x * x)), 0, np.inf, epsabs=1e-14)
    assert 1 / normalization_constant(KernelFamily.exp_bracket(1)) == pytest.approx(Z, rel=1e-11)


def test_nonintegrable_barenblatt_rejected():
    # 2 alpha <= d makes the profile non-integrable
    with pytest.raises(InvalidParameterError):
        KernelFamily.barenblatt(alpha=0.5)
    with pytest.raises(InvalidParameterError):
        KernelFamily.barenblatt(alpha=1.0, dim=2)


@pytest.mark.parametrize("fam", ALL, ids=lambda f: f"{f.name}-d{f.dim}")
@pytest.mark.parametrize("eps", [1.0, 0.5, 0.1])
def test_unit_mass(fam, eps):
    assert abs(MollifierKernel(fam, eps).mass() - 1.0) < 1e-8


# -- evaluation -------------------------------------------------------------------

def test_eval_examples():
    assert MollifierKernel(KernelFamily.polybump(), 1.0).eval(0.0) == pytest.approx(315 / 256, rel=1e-14)
    assert MollifierKernel(KernelFamily.polybump(), 0.5).eval(0.6) == 0.0


def test_grad_example_and_fd():
    k = MollifierKernel(KernelFamily.polybump(), 1.0)
    expected = -(315 / 256) * 1.6875
    assert k.grad(0.5) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(-2.076416, abs=1e-6)
    h = 1e-6
    assert (k.eval(0.5 + h) - k.eval(0.5 - h)) / (2 * h) == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("fam", ALL, ids=lambda f: f"{f.name}-d{f.dim}")
def test_grad_zero_at_origin(fam):
    k = MollifierKernel(fam, 0.7)
    x = np.zeros(fam.dim) if fam.dim == 2 else 0.0
    assert np.all(k.grad(x) == 0.0)


@pytest.mark.parametrize("fam", ALL, ids=lambda f: f"{f.name}-d{f.dim}")
def test_symmetry_random_points(fam, rng):
    k = MollifierKernel(fam, 0.8)
    x = rng.uniform(-2, 2, size=(1000, fam.dim))
    if fam.dim == 1:
        x = x[:, 0]
    np.testing.assert_array_equal(k.eval(x), k.eval(-x))
    np.testing.assert_array_equal(k.grad(x), -k.grad(-x))


@pytest.mark.parametrize("fam", ALL, ids=lambda f: f"{f.name}-d{f.dim}")
def test_grad_matches_central_differences(fam, rng):
    for eps in (1.0, 0.5, 0.1):
        k = MollifierKernel(fam, eps)
        reach = 0.95 * eps if fam.compact else 3 * eps
        h = 1e-6 * eps
        for x in rng.uniform(-reach, reach, size=(20, fam.dim)):
            if fam.dim == 1:
                x = float(x[0])
                fd = (k.eval(x + h) - k.eval(x - h)) / (2 * h)
                g = k.grad(x)
            else:
                fd = np.array([(k.eval(x + h * e) - k.eval(x - h * e)) / (2 * h) for e in np.eye(2)])
                g = k.grad(x)
            assert np.max(np.abs(g - fd)) < 1e-6 * (1 + np.linalg.norm(g))


def test_exp1_gradient_dominated_by_value():
    k = MollifierKernel(KernelFamily.exp_bracket(1), 1.0)
    x = np.linspace(-50, 50, 20001)
    ratio = np.abs(k.grad(x)) / k.eval(x)
    assert ratio.max() <= 1.0 + 1e-12  # |x| / <x> <= 1


# -- moments ----------------------------------------------------------------------

def test_polybump_second_moment():
    assert MollifierKernel(KernelFamily.polybump(), 1.0).moment(2) == pytest.approx(1 / 11, rel=1e-12)


@pytest.mark.parametrize("fam", ALL, ids=lambda f: f"{f.name}-d{f.dim}")
def test_moment_zero_and_scaling(fam):
    k1, k2 = MollifierKernel(fam, 1.0), MollifierKernel(fam, 0.5)
    assert k1.moment(0) == 1.0
    assert k2.moment(2) == pytest.approx(0.25 * k1.moment(2), rel=1e-10)


@given(eps=st.floats(0.05, 3.0), q=st.floats(0.0, 2.5))
def test_moment_scaling_property(eps, q):
    fam = KernelFamily.exp_bracket(1)
    assert MollifierKernel(fam, eps).moment(q) == pytest.approx(eps**q * MollifierKernel(fam, 1.0).moment(q),
                                                                rel=1e-10)


def test_moment_direct_quadrature():
    for fam in FAMILIES_1D:
        k = MollifierKernel(fam, 0.5)
        direct = k.integral(lambda v, r: v * r * r)
        assert direct == pytest.approx(k.moment(2), rel=1e-9)


def test_divergent_moment_rejected():
    k = MollifierKernel(KernelFamily.barenblatt(alpha=2.5), 1.0)  # ~ |x|^-5: moments of order >= 4 diverge
    with pytest.raises(InvalidParameterError):
        k.moment(4.0)
    with pytest.raises(InvalidParameterError):
        k.moment(-1.0)


# -- entropy scaling ------------------------------------------------------------------

@pytest.mark.parametrize("fam", ALL, ids=lambda f: f"{f.name}-d{f.dim}")
def test_entropy_scaling_identity(fam):
    h1 = MollifierKernel(fam, 1.0).entropy()
    for eps in (0.5, 0.1):
        target = h1 - fam.dim * math.log(eps)
        assert MollifierKernel(fam, eps).entropy() == pytest.approx(target, rel=1e-6)


# -- truncation radius --------------------------------------------------------------------

def test_truncation_compact_is_eps():
    for tol in (1e-3, 1e-10):
        assert MollifierKernel(KernelFamily.polybump(), 0.37).truncation_radius(1.0, tol) == 0.37


def test_truncation_exp1_monotone_in_tol():
    k = MollifierKernel(KernelFamily.exp_bracket(1), 1.0)
    radii = [k.truncation_radius(1.0, tol) for tol in (1e-4, 1e-6, 1e-8, 1e-10)]
    assert all(np.isfinite(radii))
    assert all(np.diff(radii) > 0)
    R = radii[-1]
    assert k.grad_weighted_tail(R, 1.0) == pytest.approx(1e-10, rel=1e-6)


def test_truncation_barenblatt_closed_form_tail():
    # int_{|z|>R} |V'| = 2 V(R) for a radially decreasing 1-D profile
    fam = KernelFamily.barenblatt(alpha=2.5)
    k = MollifierKernel(fam, 1.0)
    R = k.truncation_radius(0.0, 1e-6)
    c = k.norm_const
    assert 2 * c * (1 + R * R) ** (-2.5) == pytest.approx(1e-6, rel=1e-8)
    assert R == pytest.approx(17.1586, abs=1e-4)


def test_truncation_barenblatt_divergent_weight():
    k = MollifierKernel(KernelFamily.barenblatt(alpha=2.5), 1.0)
    with pytest.raises(InvalidParameterError):
        k.truncation_radius(5.0, 1e-10)


def test_gradient_tail_scaling():
    # int_{|z| > eps R} |grad V_eps| = eps^-1 int_{|z| > R} |grad V_1|
    fam = KernelFamily.exp_bracket(1)
    R = unit_radius(fam, 0.0, 1e-10)
    eps = 0.25
    assert MollifierKernel(fam, eps).grad_weighted_tail(eps * R, 0.0) == pytest.approx(1e-10 / eps, rel=1e-6)


# -- Peetre ----------------------------------------------------------------------------------

def _bracket(x):
    return np.sqrt(1 + np.sum(np.atleast_2d(x) ** 2, axis=-1))


@given(x=st.floats(-50, 50), y=st.floats(-50, 50), p=st.floats(-5, 5))
def test_peetre_inequality_property(x, y, p):
    lhs = (_bracket([[x]]) / _bracket([[y]])) ** p
    assert lhs[0] <= peetre_rhs(np.array([[x]]), np.array([[y]]), p)[0] * (1 + 1e-12)


def test_peetre_random_pairs(rng):
    x = rng.uniform(-20, 20, size=(10_000, 2))
    y = rng.uniform(-20, 20, size=(10_000, 2))
    p = rng.uniform(-5, 5, size=10_000)
    log_lhs = p * (np.log(_bracket(x)) - np.log(_bracket(y)))
    log_rhs = 0.5 * np.abs(p) * math.log(2) + np.abs(p) * np.log(_bracket(x - y))
    assert np.all(log_lhs <= log_rhs + 1e-12)


# -- construction ----------------------------------------------------------------------------

def test_invalid_parameters():
    with pytest.raises(InvalidParameterError):
        MollifierKernel(KernelFamily.polybump(), 0.0)
    with pytest.raises(InvalidParameterError):
        KernelFamily.polybump(k=1)
    with pytest.raises(InvalidParameterError):
        KernelFamily.from_name("cauchy")
    # alpha must exceed d/2 + 1/m
    with pytest.raises(InvalidParameterError):
        KernelFamily.barenblatt(alpha=1.6, m=0.8)


def test_barenblatt_default_alpha():
    assert KernelFamily.barenblatt(m=0.8).alpha == pytest.approx(2.5)
