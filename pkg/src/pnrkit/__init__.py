"""Photon-number-resolution analysis for superconducting nanowire detectors."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    DetectorParams,
    DomainError,
    InsufficientDataError,
    MeasurementContext,
    PhotonStatistics,
    RecoveryCalibration,
    effective_mean_photons,
    fit_sqrt_coefficient,
    fwhm_to_sigma,
    kinetic_inductance_from_decay,
    max_count_rate,
    poisson_pmf,
    poisson_statistics,
    sigma_to_fwhm,
)
from .fitting import FitConfig, FitResult, fit_multigauss, seed_peaks  # noqa: E402
from .multigauss import (  # noqa: E402
    GaussianPeak,
    MultiGaussianModel,
    PnrQualityReport,
    build_model,
    build_model_from_gaps,
    photon_statistics,
    pnr_quality,
)
from .simulate import (  # noqa: E402
    DeadTimeRecovery,
    ExponentialRecovery,
    Histogram,
    IatHistogram,
    LatencyHistogram,
    LatencySamples,
    extract_recovery_time,
    simulate_iat,
    simulate_latencies,
)
from .sweep import (  # noqa: E402
    SweepResult,
    min_lk_for_quality,
    quality_vs_lk,
    sweep_delta_t,
    sweep_jitter,
    tradeoff_report,
)
