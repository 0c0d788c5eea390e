"""ergodyn: simulation and verification toolkit for stationary nonlinear
autoregressions driven by exogenous covariates.

Builds stationary solutions by backward iteration of random maps, checks
contraction/spectral-radius conditions, estimates Lyapunov exponents and
innovation-replacement dependence coefficients, and validates the central
limit theorem for path functionals at desk scale.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, RunConfig, load_config, parse_config, preset, serialize
from .contraction import ContractionCertificate, companion_matrix, spectral_radius
from .dependence import DependenceProfile, bound_curve, estimate_theta, holder_interpolate
from .limits import CltReport, Functional, partial_sum_stats
from .models import (ApGarchX, ArArchBenchmark, BinaryChoice, Categorical, Charn, Coef,
                     LinearRandomCoef, Parx, PoissonArrivalView, arrival_view,
                     contraction_metadata, kernel_inverse, step)
from .noise import (ConfigurationError, CovariateSpec, InnovationDraw,
                    coupled_covariate_path, covariate_path, draw_innovation)
from .rng import SeedStream
from .stationarity import (ConvergenceReport, Verdict, backward_sample,
                           check_conditions, coalescence_times, gap_profile,
                           lyapunov_estimate, stationary_path)

__all__ = [
    "ApGarchX", "ArArchBenchmark", "BinaryChoice", "Categorical", "Charn",
    "CltReport", "Coef", "ContractionCertificate", "ConfigurationError",
    "ConvergenceReport", "CovariateSpec", "DependenceProfile", "ExperimentConfig",
    "Functional", "InnovationDraw", "LinearRandomCoef", "Parx",
    "PoissonArrivalView", "RunConfig", "SeedStream", "Verdict", "arrival_view",
    "backward_sample", "bound_curve", "check_conditions", "coalescence_times",
    "companion_matrix", "contraction_metadata", "coupled_covariate_path",
    "covariate_path", "draw_innovation", "estimate_theta", "gap_profile",
    "holder_interpolate", "kernel_inverse", "load_config", "lyapunov_estimate",
    "parse_config", "partial_sum_stats", "preset", "serialize",
    "spectral_radius", "stationary_path", "step",
]
