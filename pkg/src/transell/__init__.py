"""Partial correlation graphs for elliptical and transelliptical data.

Rank-based scatter estimation, graphical lasso with EBIC selection,
M-matrix constrained maximum likelihood, dependence diagnostics, samplers and
an MTP2 feasibility analyzer for elliptical density generators.
"""
from .diagnostics import (
    EbicScore,
    FaithfulnessAudit,
    MahalanobisReport,
    TailDependenceReport,
    conditional_correlation,
    conditional_kendall,
    conditional_mean_coeffs,
    ebic,
    ebic_path,
    faithfulness_audit,
    fit_path,
    mahalanobis_gof,
    partial_correlations,
    select_model,
    slab_covariance,
    slab_kendall,
    tail_dependence_report,
)
from .exceptions import (
    DegenerateColumn,
    DensityUnderflow,
    DimensionTooLarge,
    GeneratorViolation,
    IndexOutOfRange,
    InfeasibleInput,
    InsufficientSample,
    InvalidLambda,
    InvalidMixing,
    MomentUndefined,
    NonMonotoneTransform,
    NotConverged,
    NotPositiveDefinite,
    TransellError,
)
from .glasso import GlassoFit, SolverConfig, glasso_fit, glasso_kkt_residual, graph_mle, lambda_path
from .matrix_core import (
    MMatrixCert,
    SpdMatrix,
    cholesky,
    inverse,
    log_det,
    m_matrix_certificate,
    nearest_correlation,
    schur_complement,
)
from .mtp2 import (
    DensityGenerator,
    Mtp2Verdict,
    generator_ratio_range,
    mtp2_check_fixed_scale,
    mtp2_dimension_window,
    parse_generator,
    supermodularity_oracle,
)
from .positive_mle import PartialCorrelationGraph, PpgFit, ppg_fit, ppg_graph
from .rank_estimation import ScatterEstimate, kendall_matrix, kendall_tau_fast, skeptic_correlation
from .sampling import (
    ChiSqOverK,
    Constant,
    DataMatrix,
    EllipticalSpec,
    Exponential,
    LambdaValue,
    MixingLaw,
    Tabulated,
    TransellipticalSpec,
    conditional_sampler,
    lambda_of_mixing,
    sample_elliptical,
    sample_transelliptical,
)

__version__ = "0.1.0"
