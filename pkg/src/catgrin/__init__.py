"""Post-selected von Neumann measurement statistics for a photon's path
("cat") and polarization ("grin") in a two-arm interferometer.

Exact closed-form readout statistics at arbitrary coupling strength,
validated against a brute-force grid oracle, plus Monte Carlo trial
simulation of the signed-product interference estimator.
"""

from .errors import (
    CatgrinError,
    ConfigError,
    OrthogonalStatesError,
    ValidationError,
    WeakLimitDivergenceError,
    ZeroPostSelectionError,
)
from .hilbert import (
    BlochAxis,
    PureState,
    SystemOperator,
    complement,
    identity_op,
    make_postselection,
    make_preparation,
    pi_l,
    pi_r,
    sigma_r,
    validate,
)
from .meters import GaussianMeter, Regime, classify_regime, meter_density, w_factor
from .weakvalues import (
    MatrixElements,
    TraceFamily,
    WeakValueSet,
    matrix_elements,
    trace_family,
    weak_values_general,
    weak_values_pure,
)
from .statistics import (
    Experiment,
    LimitCheck,
    MomentReport,
    char_function,
    complement_experiment,
    joint_density,
    limit_consistency,
    limit_moments,
    moments,
    normalization,
    postselection_probability,
)
from .cheshire import (
    CheshireReport,
    NoiseDiagnostics,
    cheshire_parameter,
    complement_identity,
    max_family,
    noise_check,
)
from .sampler import (
    SamplerConfig,
    TrialRecord,
    TrialTable,
    apply_readout_noise,
    estimate_cheshire,
    sample_trials,
    write_trials_csv,
)
from .oracle import (
    GriddedJoint,
    GriddedMeter,
    brute_force_joint,
    joint_to_csv,
    oracle_moments,
    unitary_shift_joint,
)

__version__ = "0.1.0"

__all__ = [
    "BlochAxis",
    "CatgrinError",
    "CheshireReport",
    "ConfigError",
    "Experiment",
    "GaussianMeter",
    "GriddedJoint",
    "GriddedMeter",
    "LimitCheck",
    "MatrixElements",
    "MomentReport",
    "NoiseDiagnostics",
    "OrthogonalStatesError",
    "PureState",
    "Regime",
    "SamplerConfig",
    "SystemOperator",
    "TraceFamily",
    "TrialRecord",
    "TrialTable",
    "ValidationError",
    "WeakLimitDivergenceError",
    "WeakValueSet",
    "ZeroPostSelectionError",
    "apply_readout_noise",
    "brute_force_joint",
    "char_function",
    "cheshire_parameter",
    "classify_regime",
    "complement",
    "complement_experiment",
    "complement_identity",
    "estimate_cheshire",
    "identity_op",
    "joint_density",
    "joint_to_csv",
    "limit_consistency",
    "limit_moments",
    "make_postselection",
    "make_preparation",
    "matrix_elements",
    "max_family",
    "meter_density",
    "moments",
    "noise_check",
    "normalization",
    "oracle_moments",
    "pi_l",
    "pi_r",
    "postselection_probability",
    "sample_trials",
    "sigma_r",
    "trace_family",
    "unitary_shift_joint",
    "validate",
    "w_factor",
    "weak_values_general",
    "weak_values_pure",
    "write_trials_csv",
]
