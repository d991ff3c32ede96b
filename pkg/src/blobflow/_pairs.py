"""Compiled pair sums between particles and quadrature nodes.

All loops run serially in a fixed order, so results are bit-reproducible.
Kernel families are passed as integer codes: 0 polybump, 1 exp1, 2 exp2,
3 barenblatt.  Every profile routine returns ``(v, g)`` with
``grad profile(z) = g * z``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

POLY, EXP1, EXP2, BAREN = 0, 1, 2, 3


def family_code(family) -> int:
    return {"polybump": POLY, "exp1": EXP1, "exp2": EXP2, "barenblatt": BAREN}[family.name]


def family_param(family) -> float:
    return float(family.k) if family.kind == "polybump" else float(family.alpha)


@njit(cache=True)
def _profile(code, par, r2):
    if code == POLY:
        if r2 >= 1.0:
            return 0.0, 0.0
        t = 1.0 - r2
        k = int(par)
        tk1 = t ** (k - 1)
        return tk1 * t, -2.0 * k * tk1
    if code == EXP1:
        b = math.sqrt(1.0 + r2)
        v = math.exp(-b)
        return v, -v / b
    if code == EXP2:
        v = math.exp(-(1.0 + r2))
        return v, -2.0 * v
    t = 1.0 / (1.0 + r2)
    v = t**par
    return v, -2.0 * par * v * t


@njit(cache=True)
def mixture(y, x, code, par, eps, c):
    """``(1/N) sum_j V_eps(y_k - x_j)`` for node array ``y`` (K, d) and particles ``x`` (N, d)."""
    K, d = y.shape
    N = x.shape[0]
    inv2 = 1.0 / (eps * eps)
    scale = c * eps ** (-d) / N
    out = np.empty(K)
    for kk in range(K):
        s = 0.0
        for j in range(N):
            r2 = 0.0
            for a in range(d):
                z = y[kk, a] - x[j, a]
                r2 += z * z
            r2 *= inv2
            if code == POLY and r2 >= 1.0:
                continue
            v, _ = _profile(code, par, r2)
            s += v
        out[kk] = scale * s
    return out


@njit(cache=True)
def velocity(x, y, w, code, par, eps, c):
    """``out_i = sum_k w_k grad V_eps(x_i - y_k)`` for particles ``x`` (N, d), nodes ``y`` (K, d)."""
    N, d = x.shape
    K = y.shape[0]
    inv2 = 1.0 / (eps * eps)
    scale = c * eps ** (-d - 2)
    out = np.zeros((N, d))
    for i in range(N):
        for kk in range(K):
            r2 = 0.0
            for a in range(d):
                z = x[i, a] - y[kk, a]
                r2 += z * z
            r2 *= inv2
            if code == POLY and r2 >= 1.0:
                continue
            _, g = _profile(code, par, r2)
            f = w[kk] * g
            for a in range(d):
                out[i, a] += f * (x[i, a] - y[kk, a])
        for a in range(d):
            out[i, a] *= scale
    return out


@njit(cache=True)
def moment_field(y, x, code, par, eps, c):
    """``(1/N) sum_j V_eps(y_k - x_j) (x_j - y_k)`` with shape (K, d)."""
    K, d = y.shape
    N = x.shape[0]
    inv2 = 1.0 / (eps * eps)
    scale = c * eps ** (-d) / N
    out = np.zeros((K, d))
    for kk in range(K):
        for j in range(N):
            r2 = 0.0
            for a in range(d):
                z = y[kk, a] - x[j, a]
                r2 += z * z
            r2 *= inv2
            if code == POLY and r2 >= 1.0:
                continue
            v, _ = _profile(code, par, r2)
            for a in range(d):
                out[kk, a] += v * (x[j, a] - y[kk, a])
        for a in range(d):
            out[kk, a] *= scale
    return out


@njit(cache=True)
def _log_profile(code, par, r2):
    if code == POLY:
        if r2 >= 1.0:
            return -np.inf
        return par * math.log(1.0 - r2)
    if code == EXP1:
        return -math.sqrt(1.0 + r2)
    if code == EXP2:
        return -(1.0 + r2)
    return -par * math.log1p(r2)


@njit(cache=True)
def log_mixture(y, x, code, par, eps, c):
    """``log((1/N) sum_j V_eps(y_k - x_j))`` by a streaming log-sum-exp (no underflow)."""
    K, d = y.shape
    N = x.shape[0]
    inv2 = 1.0 / (eps * eps)
    shift = math.log(c) - d * math.log(eps) - math.log(N)
    out = np.empty(K)
    for kk in range(K):
        mx = -np.inf
        s = 0.0
        for j in range(N):
            r2 = 0.0
            for a in range(d):
                z = y[kk, a] - x[j, a]
                r2 += z * z
            lv = _log_profile(code, par, r2 * inv2)
            if lv == -np.inf:
                continue
            if lv > mx:
                s = s * math.exp(mx - lv) + 1.0
                mx = lv
            else:
                s += math.exp(lv - mx)
        out[kk] = shift + mx + math.log(s) if s > 0 else -np.inf
    return out
