"""Joint clock-offset and RF-phase calibration for simulated distributed networks."""

from .baselines import TwmeModel, gcc_delay, twme_ols, two_step_phase
from .bounds import CrbResult, crb, max_aperture_m, phase_noise_variance
from .errors import (
    AmbiguousPeakError,
    ConfigurationError,
    DegenerateBasisError,
    UndefinedDerivativeError,
)
from .featext import (
    PhaseTrajectory,
    feature_trajectories,
    phase_difference_trajectory,
    subarray_integrate,
    tangent_vector,
    unwrap,
    wrap_to_pi,
)
from .harness import (
    ExperimentConfig,
    FeatureOptions,
    GeometryReport,
    SweepResult,
    TrialRecord,
    geometry_report,
    monte_carlo,
    run_trial,
)
from .regression import (
    CalibrationResult,
    DynamicBasis,
    GeomEstimate,
    build_basis,
    center,
    decouple,
    default_order,
    ghr_lfm_fast,
    ghr_regress,
)
from .scene import (
    SPEED_OF_LIGHT,
    NodeConfig,
    Observation,
    Scene,
    element_delay,
    synthesize_observations,
)
from .waveforms import WaveformKind, WaveformSpec, inst_freq, synthesize, total_phase

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
