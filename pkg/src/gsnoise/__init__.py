"""Bursty mixed Gaussian-impulsive noise: model, sampling, estimation, features."""

from .mathcore import (
    AccuracyError,
    NotPositiveDefiniteError,
    RandomStream,
    SpdMatrix,
    eigen_sym,
    integrate_nd,
    ln_gamma,
    tri_factor_inverse,
    upsilon,
)
from .model import (
    GsParams,
    MarginalParams,
    MomentDivergenceError,
    SpecialCase,
    abs_moment,
    cf,
    conditional_pdf,
    degrade,
    gsnr_db,
    log_pdf,
    marginal_pdf,
    pdf,
    pdf_at_origin,
)
from .sampler import (
    NoiseSequence,
    sample_asg_sequence,
    sample_gs_sequence,
    sample_gs_vector,
    sample_stable_subordinator,
    sample_wgn,
)
from .estimator import (
    EstimationConfig,
    EstimationError,
    EstimationReport,
    build_probe_vectors,
    ecf,
    estimate_all,
    estimate_alpha_gamma_s,
    estimate_p,
    estimate_rho,
    estimate_sigma,
    gke_origin,
    mse_benchmark,
    solve_gamma_g,
)
from .features import (
    ClusterFeatures,
    FeatureDistance,
    HistogramSpec,
    default_threshold,
    extract_features,
    feature_distance,
)

__version__ = "0.1.0"
