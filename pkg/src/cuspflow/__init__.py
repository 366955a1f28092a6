"""Numerical laboratory for cusp excursions of geodesics on cusped surfaces."""

from .errors import (
    ConfigError,
    CuspflowError,
    DomainError,
    InsufficientDataError,
    NonReturnError,
    NotApplicableError,
    SingularityError,
    StepFailureError,
)
from .geometry import (
    AngularData,
    PhaseState,
    ProfileSurface,
    Trajectory,
    angular_data,
    cusp_distance,
    cusp_volume,
    gaussian_curvature,
    geodesic_rhs,
    integrate_geodesic,
    inverse_cusp_distance,
    level_length,
    metric_coefficients,
)
from .excursion import (
    ExcursionRecord,
    ExcursionTable,
    ScalingFit,
    check_convexity,
    fit_power_law,
    inverse_delta_functional,
    predict_delta_min,
    simulate_excursion,
    winding_identity_check,
)
from .mixing import (
    BumpFamily,
    EffectiveAverageConfig,
    FlowPoint,
    MixingFlowModel,
    RateModel,
    SandwichReport,
    VarianceGrowthResult,
    birkhoff_integral,
    closed_form_double_integral,
    correlation_estimate,
    create_flow,
    effective_sandwich_experiment,
    variance_growth_experiment,
)
from .montecarlo import (
    AcceptanceWindow,
    GeodesicSummary,
    ReturnProcess,
    SimulationOptions,
    ensemble,
    max_excursion_window_check,
    sample_return_event,
    simulate_long_geodesic,
    sullivan_comparison,
    winding_and_distance_linearity,
)
from .config import ExperimentConfig, load_config, parse_config

__version__ = "0.1.0"
