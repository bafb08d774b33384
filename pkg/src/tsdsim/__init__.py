"""Monte Carlo threshold detection of classical Gaussian random signals.

Classical random (bi-)signals whose covariance structure encodes a quantum
state are measured by windowed threshold detectors with background
calibration; relative click rates reproduce Born-rule probabilities and
coincidence counting violates the CHSH inequality.  An analytic quantum
oracle supplies every reference value.
"""

from .coincidence import (
    CoincidenceParams,
    JointClickRecord,
    estimate_joint_probabilities,
    estimate_marginal_probabilities,
    mean_joint_time,
    run_pair_trial,
)
from .detector import (
    ClickRecord,
    DetectorParams,
    MeanTimeResult,
    NoClick,
    ProbabilityReport,
    calibrate_background,
    estimate_single_probabilities,
    mean_click_time,
    run_single_trial,
    smoothed_energy,
)
from .errors import TsdError
from .gaussian import (
    GaussianLaw,
    QuadraticForm,
    mc_quadratic_correlation,
    mc_quadratic_mean,
    quadratic_correlation,
    quadratic_correlation_block,
    quadratic_mean,
)
from .model import (
    CorrelationModel,
    PerBinCovariance,
    SingleSignalSpec,
    build_matrix_model,
    build_scalar_pair_model,
    per_bin_covariance,
    rotate_bases,
    singlet_model,
    validate_psd,
)
from .oracle import (
    CANONICAL_CHSH_ANGLES,
    DensityMatrix,
    QuantumState,
    born_probability,
    chsh_value,
    correlation,
    density_from_covariance,
    joint_born,
    partial_trace,
    state_from_correlations,
)
from .sampling import (
    BinSample,
    DiscretizationParams,
    FactorCache,
    matrix_sqrt_psd,
    sample_bin,
    trial_rng,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
