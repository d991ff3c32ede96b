"""Deterministic blob-method particle solvers for diffusion as Wasserstein gradient flows."""

__version__ = "0.1.0"

from .dynamics import Trajectory, simulate, step, velocity  # noqa: E402
from .energy import MixtureDensity, energy, entropy_regularized, fast_energy, lambda_constant  # noqa: E402
from .errors import (BlobflowError, BlowUpError, ConfigError, ConvergenceError, CoverageError,  # noqa: E402
                     EvaluationError, InvalidParameterError)
from .kernels import KernelFamily, MollifierKernel  # noqa: E402
from .metrics import commutator_norm, growth_bound_check, rate_fit, w2_1d, w2_particles_vs_density_1d  # noqa: E402
from .model import ExternalPotential, ParticleState, ProblemSpec  # noqa: E402
from .quadrature import QuadSettings, QuadratureRule, gauss_legendre  # noqa: E402
from .reference import (GridDensity1D, QuantileDiscretization, barenblatt_fast, heat_exact, jko_solve,  # noqa: E402
                        jko_step, ou_exact, quantize)

__all__ = [
    "BlobflowError", "BlowUpError", "ConfigError", "ConvergenceError", "CoverageError", "EvaluationError",
    "ExternalPotential", "GridDensity1D", "InvalidParameterError", "KernelFamily", "MixtureDensity",
    "MollifierKernel", "ParticleState", "ProblemSpec", "QuadSettings", "QuadratureRule", "QuantileDiscretization",
    "Trajectory", "barenblatt_fast", "commutator_norm", "energy", "entropy_regularized", "fast_energy",
    "gauss_legendre", "growth_bound_check", "heat_exact", "jko_solve", "jko_step", "lambda_constant",
    "ou_exact", "quantize", "rate_fit", "simulate", "step", "velocity", "w2_1d", "w2_particles_vs_density_1d",
]
