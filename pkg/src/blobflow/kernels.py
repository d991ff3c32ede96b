"""Radial mollifier kernels and their epsilon-rescalings.

Three profile families are provided, all radial, even and of unit mass
after normalization:

``polybump``
    ``c (1 - |x|^2)^k`` on the unit ball, zero outside (``k >= 2``).
``exp`` (``exp1`` / ``exp2``)
    ``exp(-<x>^p) / Z`` with the Japanese bracket ``<x> = sqrt(1 + |x|^2)``.
``barenblatt``
    ``c <x>^(-2 alpha)``, the heavy-tailed kernel used for fast diffusion.

A :class:`MollifierKernel` couples a family with a width ``epsilon``;
``V_eps(x) = eps^-d V_1(x / eps)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidParameterError

FAMILY_NAMES = ("polybump", "exp1", "exp2", "barenblatt")

_QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-13, limit=400)


def bracket(x):
    """Japanese bracket ``sqrt(1 + |x|^2)`` of scalars or points."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class KernelFamily:
    """Unit-width kernel profile together with its spatial dimension.

    Use the constructors :meth:`polybump`, :meth:`exp_bracket`,
    :meth:`barenblatt` or :meth:`from_name` rather than the raw fields.
    """

    kind: str
    dim: int = 1
    k: int = 4
    p: int = 1
    alpha: float = 0.0
    m: float | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidParameterError(f"dimension must be 1 or 2, got {self.dim}")
        if self.kind == "polybump":
            if int(self.k) != self.k or self.k < 2:
                raise InvalidParameterError(f"polybump exponent must be an integer >= 2, got {self.k}")
        elif self.kind == "exp":
            if self.p not in (1, 2):
                raise InvalidParameterError(f"exp-bracket power must be 1 or 2, got {self.p}")
        elif self.kind == "barenblatt":
            d = self.dim
            if self.m is not None and not (d / (d + 2) < self.m < 1):
                raise InvalidParameterError(f"m = {self.m} outside ({d}/{d + 2}, 1)")
            if not 2 * self.alpha > d:
                raise InvalidParameterError(
                    f"barenblatt profile with alpha = {self.alpha} is not integrable in d = {d}"
                )
            if self.m is not None and not self.alpha > d / 2 + 1 / self.m:
                raise InvalidParameterError(
                    f"alpha = {self.alpha} must exceed d/2 + 1/m = {d / 2 + 1 / self.m:.6g}"
                )
        else:
            raise InvalidParameterError(f"unknown kernel family {self.kind!r}")

    @classmethod
    def polybump(cls, k: int = 4, dim: int = 1) -> "KernelFamily":
        return cls("polybump", dim=dim, k=k)

    @classmethod
    def exp_bracket(cls, p: int = 1, dim: int = 1) -> "KernelFamily":
        return cls("exp", dim=dim, p=p)

    @classmethod
    def barenblatt(cls, alpha: float | None = None, m: float | None = None, dim: int = 1) -> "KernelFamily":
        """Barenblatt-type kernel; ``alpha`` defaults to ``1 / (2 (1 - m))``."""
        if alpha is None:
            if m is None:
                raise InvalidParameterError("barenblatt kernel needs alpha or a target m")
            alpha = 1.0 / (2.0 * (1.0 - m))
        return cls("barenblatt", dim=dim, alpha=float(alpha), m=m)

    @classmethod
    def from_name(cls, name: str, dim: int = 1, k: int = 4, alpha: float | None = None,
                  m: float | None = None) -> "KernelFamily":
        """Build a family from its config name (``polybump``, ``exp1``, ``exp2``, ``barenblatt``)."""
        if name == "polybump":
            return cls.polybump(k=k, dim=dim)
        if name in ("exp1", "exp2"):
            return cls.exp_bracket(p=int(name[-1]), dim=dim)
        if name == "barenblatt":
            return cls.barenblatt(alpha=alpha, m=m, dim=dim)
        raise InvalidParameterError(f"unknown kernel family {name!r}; expected one of {FAMILY_NAMES}")

    @property
    def name(self) -> str:
        if self.kind == "exp":
            return f"exp{self.p}"
        return self.kind

    @property
    def compact(self) -> bool:
        return self.kind == "polybump"

    # -- unnormalized profile as a function of r^2 ---------------------------

    def profile(self, r2):
        """Unnormalized profile evaluated at squared radius ``r2``."""
        r2 = np.asarray(r2, dtype=float)
        if self.kind == "polybump":
            inside = np.clip(1.0 - r2, 0.0, None)
            return inside**self.k
        if self.kind == "exp":
            if self.p == 1:
                return np.exp(-np.sqrt(1.0 + r2))
            return np.exp(-(1.0 + r2))
        return (1.0 + r2) ** (-self.alpha)

    def profile_grad_factor(self, r2):
        """Factor ``g`` with ``grad profile(x) = g(|x|^2) x``."""
        r2 = np.asarray(r2, dtype=float)
        if self.kind == "polybump":
            inside = np.clip(1.0 - r2, 0.0, None)
            return -2.0 * self.k * inside ** (self.k - 1)
        if self.kind == "exp":
            if self.p == 1:
                b = np.sqrt(1.0 + r2)
                return -np.exp(-b) / b
            return -2.0 * np.exp(-(1.0 + r2))
        t = 1.0 / (1.0 + r2)
        return -2.0 * self.alpha * t ** (self.alpha + 1.0)

    def log_profile(self, r2):
        """``log profile(r2)``; ``-inf`` outside a compact support."""
        r2 = np.asarray(r2, dtype=float)
        if self.kind == "polybump":
            with np.errstate(divide="ignore"):
                return self.k * np.log(np.clip(1.0 - r2, 0.0, None))
        if self.kind == "exp":
            if self.p == 1:
                return -np.sqrt(1.0 + r2)
            return -(1.0 + r2)
        return -self.alpha * np.log1p(r2)

    def moment_exponent_limit(self) -> float:
        """Supremum of the exponents ``q`` with a finite ``q``-th moment."""
        if self.kind == "barenblatt":
            return 2.0 * self.alpha - self.dim
        return math.inf


def _radial_quad(f, d: int, upper: float, split: float | None = None) -> float:
    """``|S^{d-1}| * int_0^upper r^{d-1} f(r) dr`` by adaptive quadrature."""
    g = (lambda r: f(r)) if d == 1 else (lambda r: r ** (d - 1) * f(r))
    if math.isinf(upper):
        a = split if split is not None else 8.0
        head = integrate.quad(g, 0.0, a, **_QUAD_OPTS)[0]
        tail = integrate.quad(g, a, math.inf, **_QUAD_OPTS)[0]
        total = head + tail
    else:
        total = integrate.quad(g, 0.0, upper, **_QUAD_OPTS)[0]
    return sphere_area(d) * total


def _unit_upper(family: KernelFamily) -> float:
    return 1.0 if family.compact else math.inf


def normalization_constant(family: KernelFamily) -> float:
    """Constant ``c`` making ``c * profile`` a probability density on R^d.

    Compactly supported profiles are integrated over ``[0, 1]`` exactly;
    global ones over ``[0, 8] U [8, inf)`` with QUADPACK's infinite-interval
    rule, so the tail is integrated rather than dropped.
    """
    mass = _radial_quad(lambda r: float(family.profile(r * r)), family.dim, _unit_upper(family))
    if not np.isfinite(mass) or mass <= 0:
        raise InvalidParameterError(f"profile of {family} is not integrable")
    return 1.0 / mass


@lru_cache(maxsize=None)
def _cached_norm(family: KernelFamily) -> float:
    return normalization_constant(family)


@dataclass(frozen=True)
class MollifierKernel:
    """``V_eps(x) = eps^-d c profile(|x|^2 / eps^2)``.

    Immutable; all methods are pure.  ``norm_const`` is computed from the
    family unless given explicitly (the explicit form exists for negative
    controls that need a deliberately mis-normalized kernel).
    """

    family: KernelFamily
    epsilon: float = 1.0
    norm_const: float | None = field(default=None)

    def __post_init__(self):
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise InvalidParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.norm_const is None:
            object.__setattr__(self, "norm_const", _cached_norm(self.family))

    @property
    def dim(self) -> int:
        return self.family.dim

    @property
    def compact(self) -> bool:
        return self.family.compact

    @property
    def support_radius(self) -> float:
        return self.epsilon if self.compact else math.inf

    @property
    def sup_norm(self) -> float:
        """``||V_eps||_inf``, attained at the origin."""
        return self.norm_const * float(self.family.profile(0.0)) * self.epsilon ** (-self.dim)

    def with_epsilon(self, epsilon: float) -> "MollifierKernel":
        return MollifierKernel(self.family, epsilon)

    def _r2(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return (x / self.epsilon) ** 2
        return np.sum((x / self.epsilon) ** 2, axis=-1)

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Kernel value at ``x`` (elementwise for d = 1, trailing axis for d = 2)."""
        scale = self.norm_const * self.epsilon ** (-self.dim)
        return scale * self.family.profile(self._r2(x))

    def grad(self, x):
        """Closed-form gradient; same shape as ``x``."""
        x = np.asarray(x, dtype=float)
        scale = self.norm_const * self.epsilon ** (-self.dim - 2)
        g = self.family.profile_grad_factor(self._r2(x))
        if self.dim == 1:
            return scale * g * x
        return scale * g[..., None] * x

    def log_eval(self, x):
        scale = math.log(self.norm_const) - self.dim * math.log(self.epsilon)
        return scale + self.family.log_profile(self._r2(x))

    def radial(self, r):
        """Kernel value as a function of the radius ``r = |x|``."""
        r = np.asarray(r, dtype=float)
        return self.norm_const * self.epsilon ** (-self.dim) * self.family.profile((r / self.epsilon) ** 2)

    def radial_derivative(self, r):
        """``d V_eps / d r``; nonpositive since every profile is radially decreasing."""
        r = np.asarray(r, dtype=float)
        g = self.family.profile_grad_factor((r / self.epsilon) ** 2)
        return self.norm_const * self.epsilon ** (-self.dim - 2) * g * r

    # -- integrals ---------------------------------------------------------

    def _upper(self) -> float:
        return self.epsilon if self.compact else math.inf

    def integral(self, f) -> float:
        """``int f(V_eps(x), |x|) dx`` by radial adaptive quadrature."""
        split = 8.0 * self.epsilon
        return _radial_quad(lambda r: f(float(self.radial(r)), r), self.dim, self._upper(), split)

    def mass(self) -> float:
        return self.integral(lambda v, r: v)

    def moment(self, q: float) -> float:
        """``int |x|^q V_eps(x) dx = eps^q int |x|^q V_1(x) dx``.

        The unit-width moment is computed once by quadrature; the epsilon
        dependence is applied analytically.
        """
        if q < 0:
            raise InvalidParameterError(f"moment order must be nonnegative, got {q}")
        if not q < self.family.moment_exponent_limit():
            raise InvalidParameterError(
                f"moment of order {q} diverges for {self.family.name} (limit {self.family.moment_exponent_limit()})"
            )
        if q == 0:
            return 1.0 if self.norm_const == _cached_norm(self.family) else self.norm_const / _cached_norm(self.family)
        return self.epsilon**q * _unit_moment(self.family, float(q)) * self.norm_const / _cached_norm(self.family)

    def entropy(self) -> float:
        """``int V_eps log V_eps`` evaluated directly at width ``epsilon``."""
        logc = math.log(self.norm_const) - self.dim * math.log(self.epsilon)

        def f(v, r):
            if v <= 0.0:
                return 0.0
            return v * (logc + float(self.family.log_profile((r / self.epsilon) ** 2)))

        return self.integral(f)

    def power_integral(self, m: float) -> float:
        """``int V_eps^m`` evaluated directly at width ``epsilon``."""
        return self.integral(lambda v, r: v**m if v > 0 else 0.0)

    def grad_weighted_tail(self, radius: float, weight_exponent: float) -> float:
        """``int_{|z| > radius} |grad V_eps(z)| <z>^w dz``."""
        if self.compact and radius >= self.epsilon:
            return 0.0
        d = self.dim

        def g(r):
            return r ** (d - 1) * abs(float(self.radial_derivative(r))) * (1.0 + r * r) ** (weight_exponent / 2)

        upper = self.epsilon if self.compact else math.inf
        if math.isinf(upper):
            mid = max(radius, 8.0 * self.epsilon)
            val = 0.0
            if mid > radius:
                val += integrate.quad(g, radius, mid, **_QUAD_OPTS)[0]
            val += integrate.quad(g, mid, math.inf, **_QUAD_OPTS)[0]
        else:
            val = integrate.quad(g, radius, upper, **_QUAD_OPTS)[0]
        return sphere_area(d) * val

    def truncation_radius(self, weight_exponent: float = 0.0, tol: float = 1e-10) -> float:
        """Radius ``R`` with ``int_{|z|>R} |grad V_eps| <z>^w dz < tol``.

        Returns ``epsilon`` for compactly supported kernels.
        """
        if tol <= 0:
            raise InvalidParameterError(f"tolerance must be positive, got {tol}")
        if self.compact:
            return self.epsilon
        if self.family.kind == "barenblatt":
            # |grad V| ~ r^(-2 alpha - 1): weighted tail finite iff w < 2 alpha + 1 - d
            if not weight_exponent < 2 * self.family.alpha + 1 - self.dim:
                raise InvalidParameterError(
                    f"weighted gradient tail diverges for alpha = {self.family.alpha}, w = {weight_exponent}"
                )
        tail = lambda R: self.grad_weighted_tail(R, weight_exponent)  # noqa: E731
        if tail(0.0) < tol:
            return 0.0
        hi = self.epsilon
        while tail(hi) >= tol:
            hi *= 2.0
            if hi > 1e12:
                raise InvalidParameterError("truncation radius search did not terminate")
        lo = hi / 2.0 if hi > self.epsilon else 0.0
        return optimize.brentq(lambda R: math.log(max(tail(R), 1e-300)) - math.log(tol), lo, hi,
                               xtol=1e-12 * hi, rtol=1e-12)


@lru_cache(maxsize=None)
def _unit_moment(family: KernelFamily, q: float) -> float:
    c = _cached_norm(family)
    upper = _unit_upper(family)
    return c * _radial_quad(lambda r: r**q * float(family.profile(r * r)), family.dim, upper)


@lru_cache(maxsize=None)
def unit_radius(family: KernelFamily, weight_exponent: float, tol: float) -> float:
    """Truncation radius of the unit-width kernel, in units of epsilon."""
    return MollifierKernel(family, 1.0).truncation_radius(weight_exponent, tol)


@lru_cache(maxsize=None)
def unit_tail_radius(family: KernelFamily, integrand: str, tol: float, m: float = 1.0) -> float:
    """Radius (units of epsilon) beyond which an energy integrand of ``V_1`` is below ``tol``.

    ``integrand`` is ``"entropy"`` for ``|V log V|`` or ``"power"`` for ``V^m``.
    """
    if family.compact:
        return 1.0
    kern = MollifierKernel(family, 1.0)
    d = family.dim

    def integrand_r(r):
        v = float(kern.radial(r))
        if v <= 0:
            return 0.0
        if integrand == "entropy":
            val = abs(v * float(kern.log_eval(r)))
        else:
            val = v**m
        return r ** (d - 1) * val

    def tail(R):
        return sphere_area(d) * (integrate.quad(integrand_r, R, 2 * R + 8, **_QUAD_OPTS)[0]
                                 + integrate.quad(integrand_r, 2 * R + 8, math.inf, **_QUAD_OPTS)[0])

    hi = 1.0
    while tail(hi) >= tol:
        hi *= 2.0
        if hi > 1e12:
            raise InvalidParameterError(f"{integrand} tail of {family.name} does not decay below {tol}")
    return hi


def peetre_rhs(x, y, p: float):
    """Right-hand side ``2^(|p|/2) <x - y>^|p|`` of Peetre's inequality."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    r2 = diff * diff if diff.ndim <= 1 or diff.shape[-1] != 2 else np.sum(diff * diff, axis=-1)
    return 2.0 ** (abs(p) / 2) * (1.0 + r2) ** (abs(p) / 2)
