"""Spectral dynamic mimicry: synthesize the control field that makes a
chosen dynamical system (closed/open, quantum/classical) emit a prescribed
induced-dipole signal, and analyze the result spectrally and under noise."""

from .errors import (
    BoxOverflowError,
    CalibrationError,
    ConfigError,
    CorruptedStateError,
    DegenerateTargetError,
    DomainTooSmallError,
    GridMismatchError,
    IncompatibleTargetError,
    SdmError,
    StepperInstabilityError,
    TrajectoryOverflowError,
)
from .grids import Grid
from .potentials import (
    ARGON,
    ARGON_IP_AU,
    HYDROGEN,
    EigenSolution,
    SoftCoulombModel,
    calibrate_radius,
    potential_and_gradient,
    solve_bound_states,
)
from .propagators import (
    CHI_242FS_100K,
    GAMMA_242FS,
    AbsorberSpec,
    DrivenRunResult,
    StepperConfig,
    damping_rate_au,
    decoherence_rate_au,
    run_driven,
    step_closed_quantum,
    step_fokker_planck,
    step_newton,
    step_open_quantum,
)
from .signals import (
    DrivePulse,
    Spectrum,
    TimeSeries,
    bandlimit_filter,
    derivatives,
    fourier_spectrum,
    inverse_fourier_spectrum,
    make_reference_pulse,
    relative_distance,
)
from .states import (
    DensityMatrix,
    EigenstateSpec,
    GaussianBlobSpec,
    NormalEnsembleSpec,
    PhaseSpaceDensity,
    SystemKind,
    TrajectoryEnsemble,
    Wavefunction,
    expectation_a,
    expectation_p,
    expectation_vprime,
    expectation_x,
    init_state,
)
from .tracking import (
    TrackingConfig,
    TrackingResult,
    check_compatibility,
    initial_field,
    next_field,
    track,
    verify_bandlimited,
)

__version__ = "0.1.0"
