import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blobflow.errors import EvaluationError, InvalidParameterError
from blobflow.kernels import KernelFamily, MollifierKernel, unit_tail_radius
from blobflow.quadrature import (QuadSettings, composite, gauss_legendre, graded_breaks, integrate, particle_rule,
                                 support_breaks, tensor_rule, union_of_balls_rule)


def _legendre_newton(n):
    """Independent oracle: Legendre roots by Newton iteration on the three-term recurrence."""
    nodes, weights = [], []
    for i in range(1, n + 1):
        x = math.cos(math.pi * (i - 0.25) / (n + 0.5))
        for _ in range(100):
            p0, p1 = 1.0, x
            for k in range(2, n + 1):
                p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
            dp = n * (x * p1 - p0) / (x * x - 1) if n > 1 else 1.0
            if n == 1:
                p1, dp = x, 1.0
            dx = p1 / dp
            x -= dx
            if abs(dx) < 1e-16:
                break
        nodes.append(x)
        weights.append(2 / ((1 - x * x) * dp * dp))
    order = np.argsort(nodes)
    return np.array(nodes)[order], np.array(weights)[order]


def test_two_point_rule():
    r = gauss_legendre(2)
    np.testing.assert_allclose(np.sort(r.nodes.ravel()), [-1 / math.sqrt(3), 1 / math.sqrt(3)], rtol=1e-15)
    np.testing.assert_allclose(r.weights, [1.0, 1.0], rtol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16, 32, 48])
def test_nodes_match_newton_oracle(n):
    r = gauss_legendre(n)
    x, w = _legendre_newton(n)
    order = np.argsort(r.nodes.ravel())
    np.testing.assert_allclose(r.nodes.ravel()[order], x, atol=1e-14)
    np.testing.assert_allclose(r.weights[order], w, atol=1e-14)


def test_exactness_examples():
    assert integrate(gauss_legendre(2), lambda x: x**2) == pytest.approx(2 / 3, abs=1e-15)
    assert integrate(gauss_legendre(3, 0, 1), lambda x: x**5) == pytest.approx(1 / 6, abs=1e-15)
    assert integrate(gauss_legendre(4, 0, 1), lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-15)


@given(n=st.integers(1, 20), a=st.floats(-5, 0), width=st.floats(0.1, 5), deg_frac=st.floats(0, 1))
def test_polynomial_exactness_property(n, a, width, deg_frac):
    b = a + width
    deg = int(deg_frac * (2 * n - 1))
    exact = (b ** (deg + 1) - a ** (deg + 1)) / (deg + 1)
    got = integrate(gauss_legendre(n, a, b), lambda x: x**deg)
    assert got == pytest.approx(exact, rel=1e-11, abs=1e-11 * max(1.0, abs(a), abs(b)) ** (deg + 1))


@given(n=st.integers(1, 40), a=st.floats(-10, 10), width=st.floats(1e-3, 10))
def test_weights_sum_to_volume(n, a, width):
    r = gauss_legendre(n, a, a + width)
    assert r.weights.sum() == pytest.approx(width, rel=1e-12)


def test_polybump_integrates_to_one():
    k = MollifierKernel(KernelFamily.polybump(), 1.0)
    assert abs(integrate(gauss_legendre(16, -1, 1), k.eval) - 1.0) < 1e-12


def test_exp1_truncated_domain():
    k = MollifierKernel(KernelFamily.exp_bracket(1), 1.0)
    tol = 1e-10
    R = unit_tail_radius(k.family, "power", tol)
    rule = composite(np.linspace(-R, R, 2 * int(R) + 1), 16)
    assert abs(integrate(rule, k.eval) - 1.0) < 2 * tol


def test_refinement_converges_monotonically():
    f = lambda x: np.exp(np.sin(3 * x))  # noqa: E731
    ref = integrate(gauss_legendre(64, 0, 2), f)
    errs = [abs(integrate(gauss_legendre(n, 0, 2), f) - ref) for n in (4, 6, 8, 10, 12)]
    assert all(np.diff(errs) < 0)


def test_tensor_rule_separable_exactness():
    rx, ry = gauss_legendre(3, 0, 1), gauss_legendre(4, -1, 2)
    r = tensor_rule(rx, ry)
    assert r.dim == 2 and r.size == 12
    got = integrate(r, lambda p: p[..., 0] ** 5 * p[..., 1] ** 7)
    assert got == pytest.approx((1 / 6) * (2**8 - 1) / 8, rel=1e-13)
    assert gauss_legendre(5, 0, 2, dim=2).volume == pytest.approx(4.0)


def test_invalid_rules():
    with pytest.raises(InvalidParameterError):
        gauss_legendre(0)
    with pytest.raises(InvalidParameterError):
        gauss_legendre(3, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        composite([0.0], 4)
    with pytest.raises(InvalidParameterError):
        QuadSettings(n=0)


def test_nonfinite_integrand_reports_location():
    with pytest.raises(EvaluationError) as exc:
        integrate(gauss_legendre(4, 0, 1), lambda x: np.where(x > 0.5, np.inf, 0.0))
    assert exc.value.location is not None and float(np.ravel(exc.value.location)[0]) > 0.5


def test_graded_breaks_cover_reach():
    b = graded_breaks(-1.0, 1.0, 0.25, 20.0)
    assert b[0] <= -21.0 + 1e-12 and b[-1] >= 21.0 - 1e-12
    assert np.all(np.diff(b) > 0)


def test_union_of_balls_exact_on_supports():
    centers = np.array([-2.0, -1.9, 0.5, 3.0])
    rule = union_of_balls_rule(centers, 0.3, 8, 0.3)
    lo, hi = support_breaks(centers, 0.3, 0.3)
    assert rule.weights.sum() == pytest.approx(float(np.sum(hi - lo)), rel=1e-12)
    k = MollifierKernel(KernelFamily.polybump(), 0.3)
    mass = integrate(rule, lambda y: k.eval(y[:, None] - centers[None, :]).mean(axis=1))
    assert mass == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("family", [KernelFamily.exp_bracket(1), KernelFamily.barenblatt(m=0.8)])
def test_particle_rule_mass_global(family):
    k = MollifierKernel(family, 0.3)
    x = np.array([[-1.0], [0.2], [0.7]])
    reach = k.epsilon * unit_tail_radius(family, "power", 1e-10)
    rule = particle_rule(x, k, QuadSettings(), reach)
    mass = integrate(rule, lambda y: k.eval(y[:, None] - x[None, :, 0]).mean(axis=1))
    assert abs(mass - 1.0) < 1e-8
