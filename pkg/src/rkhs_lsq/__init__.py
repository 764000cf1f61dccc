"""Weighted least-squares sampling recovery in reproducing kernel Hilbert spaces.

Modules: ``spectral`` (orthonormal systems and singular values),
``christoffel`` (Christoffel functions and spectral tails), ``sampler``
(sampling densities and rejection sampling), ``recover`` (weighted least
squares), ``subsample`` (frame subsampling), ``certify`` (worst-case
error certificates), ``bounds`` (closed-form error bounds) and
``experiment`` (seeded multi-trial runs).
"""

from .errors import DomainError, EnvelopeViolation, GuaranteeError, RankDeficientError, ResourceError
from .spectral import SpectralModel, WeightModel, ranked_spectrum
from .christoffel import GridSpec
from .sampler import DensityVariant, NodeSet, density_eval, density_mass, draw_nodes
from .recover import RecoveryOperator, assemble, evaluate, fit, spectral_norm_check
from .subsample import weaver_subsample
from .certify import certify_sup, kernel_eval, pointwise_wce
from .bounds import sigma_upper_bound, subsampled_bound, tail_min_bound, wls_bound
from .experiment import ExperimentConfig, rate_fit, run_experiment

__version__ = "0.1.0"

__all__ = [
    "DensityVariant", "DomainError", "EnvelopeViolation", "ExperimentConfig", "GridSpec",
    "GuaranteeError", "NodeSet", "RankDeficientError", "RecoveryOperator", "ResourceError",
    "SpectralModel", "WeightModel", "assemble", "certify_sup", "density_eval", "density_mass",
    "draw_nodes", "evaluate", "fit", "kernel_eval", "pointwise_wce", "ranked_spectrum", "rate_fit",
    "run_experiment", "sigma_upper_bound", "spectral_norm_check", "subsampled_bound", "tail_min_bound",
    "weaver_subsample", "wls_bound",
]
