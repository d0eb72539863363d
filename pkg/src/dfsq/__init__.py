"""Distributed functional scalar quantization: design and simulation.

Build companding quantizers from point densities, derive fMSE-optimal
designs from functional sensitivity profiles, and compare high-resolution
distortion limits with Monte Carlo runs of the actual quantizers.
"""
from .computations import Computation, computation_from_config, make_computation
from .decoders import Decoder, ExcessSweep, build_decoder, excess_fmse_sweep
from .design import (
                     PointDensity,
                     UniformDensity,
                     design_fmse_entropy_constrained,
                     design_fmse_fixed_rate,
                     design_from_unnormalized,
                     design_mse_fixed_rate,
                     design_uniform,
)
from .distortion import (
                     DistortionReport,
                     MultivariateLimit,
                     RateAllocation,
                     allocate_rates,
                     check_tail_condition,
                     codebook_sizes,
                     empirical_fmse,
                     entropy_constrained_constant,
                     index_entropy,
                     one_third_norm,
                     theory_entropy_constrained_optimal,
                     theory_fixed_rate_optimal,
                     theory_multivariate_limit,
                     theory_univariate_limit,
                     weighted_fmse_theory,
)
from .errors import (
                     DesignInfeasibleError,
                     DFSQError,
                     DivergenceError,
                     EstimationError,
                     InternalInconsistencyError,
                     InvalidInputError,
                     InvalidParameterError,
                     TheoryUndefinedError,
)
from .harness import ExperimentConfig, best_uniform_granular, emit_report, run_example
from .kernels import BACKEND as KERNEL_BACKEND
from .quantizer import CompandingQuantizer, build_quantizer, quantizer_from_boundaries
from .sensitivity import (
                     SensitivityProfile,
                     constant_sensitivity,
                     min_exponential_sensitivity,
                     multivariate_sensitivity_mc,
                     univariate_sensitivity,
                     weighted_sensitivity,
)
from .sources import ProductSource, SourceModel, diff_entropy, make_source, square_law

__version__ = "0.1.0"

__all__ = [
    "Computation", "computation_from_config", "make_computation",
    "Decoder", "ExcessSweep", "build_decoder", "excess_fmse_sweep",
    "PointDensity", "UniformDensity", "design_fmse_entropy_constrained",
    "design_fmse_fixed_rate", "design_from_unnormalized", "design_mse_fixed_rate",
    "design_uniform",
    "DistortionReport", "MultivariateLimit", "RateAllocation", "allocate_rates",
    "check_tail_condition", "codebook_sizes", "empirical_fmse", "entropy_constrained_constant",
    "index_entropy", "one_third_norm", "theory_entropy_constrained_optimal",
    "theory_fixed_rate_optimal", "theory_multivariate_limit", "theory_univariate_limit",
    "weighted_fmse_theory",
    "DesignInfeasibleError", "DFSQError", "DivergenceError", "EstimationError",
    "InternalInconsistencyError", "InvalidInputError", "InvalidParameterError",
    "TheoryUndefinedError",
    "ExperimentConfig", "best_uniform_granular", "emit_report", "run_example",
    "KERNEL_BACKEND",
    "CompandingQuantizer", "build_quantizer", "quantizer_from_boundaries",
    "SensitivityProfile", "constant_sensitivity", "min_exponential_sensitivity",
    "multivariate_sensitivity_mc", "univariate_sensitivity", "weighted_sensitivity",
    "ProductSource", "SourceModel", "diff_entropy", "make_source", "square_law",
]
