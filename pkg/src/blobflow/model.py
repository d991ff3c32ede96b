"""Core data types shared by the energy, dynamics and reference modules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .kernels import KernelFamily, MollifierKernel
from .quadrature import QuadSettings


@dataclass(frozen=True)
class ParticleState:
    """``N`` equally weighted particles in ``d`` dimensions at time ``time``.

    ``positions`` is always stored as an ``(N, d)`` float array.
    """

    positions: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        x = np.array(self.positions, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] not in (1, 2):
            raise InvalidParameterError(f"positions must have shape (N, d) with d in (1, 2), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidParameterError("positions must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)
        if not (self.time >= 0 and np.isfinite(self.time)):
            raise InvalidParameterError(f"time must be finite and nonnegative, got {self.time}")

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def x(self) -> np.ndarray:
        """Flat coordinates in d = 1 (``(N,)``); the full array otherwise."""
        return self.positions[:, 0] if self.dim == 1 else self.positions

    def shifted(self, v) -> "ParticleState":
        return ParticleState(self.positions + np.asarray(v, dtype=float), self.time)

    def permuted(self, perm) -> "ParticleState":
        return ParticleState(self.positions[np.asarray(perm)], self.time)

    def center_of_mass(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def max_radius(self) -> float:
        return float(np.sqrt(np.max(np.sum(self.positions**2, axis=1))))


@dataclass(frozen=True)
class ExternalPotential:
    """Smooth confining potential given by its kind and coefficients.

    ``quadratic``: ``|x|^2 / 2``.  ``double_well``: ``a |x|^4 / 4 - b |x|^2 / 2``
    with ``coeffs = (a, b)`` (default ``(1, 1)``).  ``polynomial``: 1-D
    ``sum_k coeffs[k] x^k``.
    """

    kind: str = "none"
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "quadratic", "double_well", "polynomial"):
            raise InvalidParameterError(f"unknown potential kind {self.kind!r}")
        if self.kind == "polynomial" and len(self.coeffs) == 0:
            raise InvalidParameterError("polynomial potential needs coefficients")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def active(self) -> bool:
        return self.kind != "none"

    def _ab(self):
        return self.coeffs if len(self.coeffs) == 2 else (1.0, 1.0)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        if self.kind == "none":
            return np.zeros_like(r2)
        if self.kind == "quadratic":
            return 0.5 * r2
        if self.kind == "double_well":
            a, b = self._ab()
            return 0.25 * a * r2 * r2 - 0.5 * b * r2
        if x.shape[-1] != 1:
            raise InvalidParameterError("polynomial potentials are one-dimensional")
        return np.polynomial.polynomial.polyval(x[..., 0], self.coeffs)

    def grad(self, x) -> np.ndarray:
        """Gradient at points ``x`` of shape ``(N, d)``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.zeros_like(x)
        if self.kind == "quadratic":
            return x.copy()
        if self.kind == "double_well":
            a, b = self._ab()
            r2 = np.sum(x * x, axis=-1, keepdims=True)
            return (a * r2 - b) * x
        if x.shape[-1] != 1:
            raise InvalidParameterError("polynomial potentials are one-dimensional")
        dc = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(x, dc)


@dataclass(frozen=True)
class ProblemSpec:
    """Equation, kernel and regularisation parameters of a particle run.

    Parameters
    ----------
    equation : {"heat", "fast"}
    kernel : MollifierKernel
    sigma : float
        Weight of the lift density in the heat mixture, ``0 <= sigma < 1``.
    m : float
        Fast-diffusion exponent in ``(d/(d+2), 1)``.
    lift : KernelFamily
        ``exp1`` (default) or ``exp2`` at unit width; only used when ``sigma > 0``.
    potential : ExternalPotential
        Optional confining potential (heat only).
    apply_sigma_factor : bool
        Multiply the heat velocity by ``1 - sigma`` so the ODE is the exact
        gradient flow of the regularised entropy.
    quad : QuadSettings
    """

    equation: str
    kernel: MollifierKernel
    sigma: float = 0.0
    m: float | None = None
    lift: KernelFamily | None = None
    potential: ExternalPotential = field(default_factory=ExternalPotential)
    apply_sigma_factor: bool = False
    quad: QuadSettings = field(default_factory=QuadSettings)

    def __post_init__(self):
        d = self.kernel.dim
        if self.equation == "heat":
            if not 0.0 <= self.sigma < 1.0:
                raise InvalidParameterError(f"sigma must lie in [0, 1), got {self.sigma}")
            if self.sigma == 0.0 and self.kernel.compact:
                raise InvalidParameterError("heat with sigma = 0 needs a globally supported kernel")
            if self.lift is None:
                object.__setattr__(self, "lift", KernelFamily.exp_bracket(1, dim=d))
            if self.lift.kind != "exp" or self.lift.dim != d:
                raise InvalidParameterError("lift must be an exp-bracket family of the kernel's dimension")
        elif self.equation == "fast":
            m = self.m
            if m is None or not d / (d + 2) < m < 1:
                raise InvalidParameterError(f"fast diffusion needs m in ({d}/{d + 2}, 1), got {m}")
            if self.sigma != 0.0:
                raise InvalidParameterError("fast diffusion takes no lift (sigma must be 0)")
            if self.kernel.compact:
                raise InvalidParameterError("fast diffusion needs a globally supported kernel")
            fam = self.kernel.family
            if fam.kind == "barenblatt":
                if not fam.alpha > d / 2 + 1 / m:
                    raise InvalidParameterError(f"alpha = {fam.alpha} must exceed d/2 + 1/m = {d / 2 + 1 / m:.6g}")
                if abs(fam.alpha - 1 / (2 * (1 - m))) < 1e-12 and not d * m * m + (3 - d) * m - 2 > 0:
                    raise InvalidParameterError(
                        f"m = {m} violates d m^2 + (3 - d) m - 2 > 0 required with alpha = 1/(2(1-m))"
                    )
            if self.potential.active:
                raise InvalidParameterError("external potentials are supported for the heat equation only")
        else:
            raise InvalidParameterError(f"equation must be 'heat' or 'fast', got {self.equation!r}")

    @property
    def dim(self) -> int:
        return self.kernel.dim

    @property
    def epsilon(self) -> float:
        return self.kernel.epsilon

    @property
    def lift_kernel(self) -> MollifierKernel:
        return MollifierKernel(self.lift, 1.0)

    @property
    def beta(self) -> float:
        """Growth exponent ``2 alpha (1 - m)`` of the fast-diffusion velocity (Barenblatt kernel)."""
        fam = self.kernel.family
        alpha = fam.alpha if fam.kind == "barenblatt" else 0.0
        return 2.0 * alpha * (1.0 - self.m) if self.equation == "fast" else 1.0

    def with_kernel(self, kernel: MollifierKernel) -> "ProblemSpec":
        from dataclasses import replace

        return replace(self, kernel=kernel)
