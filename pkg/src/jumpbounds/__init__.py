"""Trajectory statistics and precision bounds for monitored open quantum systems."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    CorrectionUndefinedError,
    DimensionMismatchError,
    DivergingRateError,
    ImprintingError,
    JumpBoundsError,
    ModelValidationError,
    MonitoringUnderflowError,
    NonErgodicModelError,
    RelativeFluctuationUndefined,
    SingularStateError,
)
from .models import (
    JumpChannel,
    LindbladModel,
    ObservableDef,
    ValidationReport,
    build_classical_network,
    build_driven_qubit,
    build_three_level_maser,
    validate,
)
from .monitoring import (
    FisherMatrixEstimate,
    FisherScalarEstimate,
    ImprintingScheme,
    MonitoringRun,
    MonitoringState,
    estimate_fisher,
    estimate_fisher_scalar,
    evolve_monitoring,
    log_likelihood,
    make_scheme,
    make_single_parameter_scheme,
    propagator_and_derivative,
    rate_asymmetries,
    score_trajectory,
)
from .operators import (
    Liouvillian,
    Operator,
    SpectralData,
    Superoperator,
    build_liouvillian,
    drazin_inverse,
    matrix_exponential,
    matrix_log,
    propagate,
    spectral_data,
    steady_state,
    unvectorize,
    vectorize,
    von_neumann_entropy,
)
from .statistics import (
    CovarianceEstimate,
    ObservableSample,
    estimate_statistics,
    evaluate_observables,
    group_counts,
    observable_values,
)
from .thermo import (
    BoundReport,
    ThermoReport,
    assemble_bounds,
    compute_thermo_report,
    correction_term_kur,
    correction_term_kur_time_integral,
    correction_term_tur,
    dynamical_activity,
    entropy_production_components,
    single_parameter_corrections,
)
from .trajectories import (
    EnsembleResult,
    InitialEnsemble,
    SamplerConfig,
    TrajectoryRecord,
    conditional_states,
    dump_records,
    load_records,
    run_ensemble,
    run_monitored_ensemble,
    sample_trajectory,
    sample_waiting_times,
)
