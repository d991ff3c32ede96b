"""Deterministic Gauss-Legendre quadrature on intervals, boxes and particle grids.

Besides single-interval rules this module builds the composite grids used
for the velocity and energy integrals: breakpoint-aligned panels for
compactly supported kernels and uniform-core / geometrically graded panels
for globally supported ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import EvaluationError, InvalidParameterError


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a quadrature rule.

    ``nodes`` has shape ``(n,)`` for d = 1 and ``(n, 2)`` for d = 2.
    ``domain`` is a list of ``(a, b)`` extents per axis (bounding box).
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: tuple

    @property
    def dim(self) -> int:
        return 1 if self.nodes.ndim == 1 else self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def volume(self) -> float:
        return float(np.sum(self.weights))


def _leggauss(n: int):
    if int(n) != n or n < 1:
        raise InvalidParameterError(f"number of nodes must be a positive integer, got {n}")
    return _leggauss_cached(int(n))


@lru_cache(maxsize=64)
def _leggauss_cached(n: int):
    t, w = leggauss(n)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0, dim: int = 1) -> QuadratureRule:
    """``n``-node Gauss-Legendre rule on ``[a, b]`` (tensorized on ``[a, b]^2`` for ``dim = 2``)."""
    if not a < b:
        raise InvalidParameterError(f"need a < b, got [{a}, {b}]")
    t, w = _leggauss(n)
    x = 0.5 * (b - a) * t + 0.5 * (b + a)
    w = 0.5 * (b - a) * w
    if dim == 1:
        return QuadratureRule(x, w, ((a, b),))
    if dim == 2:
        return tensor_rule(QuadratureRule(x, w, ((a, b),)), QuadratureRule(x, w, ((a, b),)))
    raise InvalidParameterError(f"dimension must be 1 or 2, got {dim}")


def tensor_rule(rx: QuadratureRule, ry: QuadratureRule) -> QuadratureRule:
    """Tensor product of two 1-D rules."""
    X, Y = np.meshgrid(rx.nodes, ry.nodes, indexing="ij")
    W = np.outer(rx.weights, ry.weights)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    return QuadratureRule(nodes, W.ravel(), rx.domain + ry.domain)


def integrate(rule: QuadratureRule, f) -> float:
    """``sum_i w_i f(x_i)``; ``f`` is called once on the whole node array."""
    vals = np.asarray(f(rule.nodes), dtype=float)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(f"integrand is not finite at node {rule.nodes[i]}", location=rule.nodes[i])
    return float(np.dot(rule.weights, vals))


def composite(breaks, n: int) -> QuadratureRule:
    """Composite rule with ``n`` Gauss nodes on each ``[breaks[i], breaks[i+1]]``."""
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim != 1 or breaks.size < 2 or np.any(np.diff(breaks) <= 0):
        raise InvalidParameterError("breakpoints must be strictly increasing with at least two entries")
    return _panels_rule(breaks[:-1], breaks[1:], n)


def _panels_rule(lo, hi, n: int) -> QuadratureRule:
    t, w = _leggauss(n)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return QuadratureRule(nodes, weights, ((float(lo[0]), float(hi[-1])),))


def graded_breaks(lo: float, hi: float, width: float, reach: float) -> np.ndarray:
    """Breakpoints covering ``[lo - reach, hi + reach]``.

    The core ``[lo, hi]`` is cut into uniform panels no wider than ``width``;
    outside it panel widths double geometrically until ``reach`` is covered.
    """
    if not width > 0:
        raise InvalidParameterError(f"panel width must be positive, got {width}")
    n_core = max(1, int(math.ceil((hi - lo) / width - 1e-12)))
    core = np.linspace(lo, hi, n_core + 1) if hi > lo else np.array([lo - 0.5 * width, lo + 0.5 * width])
    left, right = core[0], core[-1]
    outer = []
    step, dist = width, 0.0
    while dist < reach - 1e-12 * max(1.0, reach):
        dist = min(dist + step, reach)
        outer.append(dist)
        step *= 2.0
    outer = np.asarray(outer)
    return np.concatenate([left - outer[::-1], core, right + outer])


def support_breaks(centers, radius: float, width: float):
    """Panels covering the union of intervals ``[c - radius, c + radius]``.

    Returns arrays ``(lo, hi)`` of panel ends.  Every panel lies inside the
    union, is aligned with each ``c +- radius`` and is at most ``width`` wide.
    """
    c = np.sort(np.asarray(centers, dtype=float).ravel())
    pts = np.unique(np.concatenate([c - radius, c + radius]))
    lo_list, hi_list = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (a + b)
        j = np.searchsorted(c, mid)
        near = min(abs(mid - c[j - 1]) if j > 0 else np.inf, abs(c[j] - mid) if j < c.size else np.inf)
        if near >= radius:
            continue
        k = max(1, int(math.ceil((b - a) / width - 1e-12)))
        edges = np.linspace(a, b, k + 1)
        lo_list.append(edges[:-1])
        hi_list.append(edges[1:])
    return np.concatenate(lo_list), np.concatenate(hi_list)


def union_of_balls_rule(centers, radius: float, n: int, width: float) -> QuadratureRule:
    """Composite 1-D rule on the union of ``[c - radius, c + radius]``."""
    lo, hi = support_breaks(centers, radius, width)
    return _panels_rule(lo, hi, n)


def hull_rule(points, width: float, reach: float, n: int, dim: int = 1) -> QuadratureRule:
    """Composite rule over the point hull widened by ``reach`` with graded outer panels.

    For ``dim = 2`` the tensor product of the per-axis rules is returned.
    """
    pts = np.asarray(points, dtype=float)
    if dim == 1:
        pts = pts.ravel()
        return composite(graded_breaks(float(pts.min()), float(pts.max()), width, reach), n)
    pts = pts.reshape(-1, dim)
    axes = [composite(graded_breaks(float(pts[:, a].min()), float(pts[:, a].max()), width, reach), n)
            for a in range(dim)]
    return tensor_rule(axes[0], axes[1])


def box_union_rule(centers, radius: float, n: int, width: float) -> QuadratureRule:
    """Tensor composite rule for d = 2 covering every ball ``B_radius(c)``.

    Each axis uses the union-of-intervals panels of the projected centres;
    nodes whose panel cell misses every ball are dropped.
    """
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    rx = union_of_balls_rule(c[:, 0], radius, n, width)
    ry = union_of_balls_rule(c[:, 1], radius, n, width)
    rule = tensor_rule(rx, ry)
    # keep nodes within radius + cell diagonal of some centre; the integrand vanishes elsewhere
    slack = math.sqrt(2.0) * width
    keep = np.zeros(rule.size, dtype=bool)
    for chunk in np.array_split(np.arange(c.shape[0]), max(1, c.shape[0] // 64)):
        d2 = np.sum((rule.nodes[:, None, :] - c[None, chunk, :]) ** 2, axis=-1)
        keep |= np.any(d2 <= (radius + slack) ** 2, axis=1)
    return QuadratureRule(rule.nodes[keep], rule.weights[keep], rule.domain)


@dataclass(frozen=True)
class QuadSettings:
    """Resolution of the composite particle grids.

    ``n`` Gauss nodes per panel for velocity integrals and ``n_energy`` for
    energies, panels at most ``panel * epsilon`` wide, tails truncated once
    they fall below ``tail_tol``.
    """

    n: int = 8
    panel: float = 1.0
    tail_tol: float = 1e-10
    n_energy: int = 16

    def __post_init__(self):
        for name in ("n", "n_energy"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidParameterError(f"quad.{name} must be a positive integer, got {v}")
        if not self.panel > 0:
            raise InvalidParameterError(f"quad.panel must be positive, got {self.panel}")
        if not self.tail_tol > 0:
            raise InvalidParameterError(f"quad.tail_tol must be positive, got {self.tail_tol}")


def particle_rule(positions, kernel, settings: QuadSettings, reach: float, n: int | None = None) -> QuadratureRule:
    """Grid for integrands carried by ``V_eps`` blobs centred at ``positions``.

    Compact kernels get breakpoint-aligned panels on the union of the
    support balls.  Global kernels get a graded grid over the hull extended
    by ``reach`` (absolute units).  ``n`` overrides ``settings.n``.
    """
    n = settings.n if n is None else n
    d = kernel.dim
    pts = np.asarray(positions, dtype=float).reshape(-1, d)
    width = settings.panel * kernel.epsilon
    if kernel.compact:
        if d == 1:
            return union_of_balls_rule(pts[:, 0], kernel.epsilon, n, width)
        return box_union_rule(pts, kernel.epsilon, n, width)
    return hull_rule(pts if d == 2 else pts[:, 0], width, reach, n, dim=d)
