"""Simulation and calibration of stacked metasurface propagation models."""

from .errors import (
    ConfigurationError,
    DimensionError,
    EmptyInputError,
    SimcalError,
    SingularityError,
    UndefinedReferenceError,
)
from .geometry import (
    ErrorBounds,
    ErrorState,
    LayerGeometry,
    SimStackConfig,
    apply_errors,
    build_ideal_geometry,
    sample_errors,
)
from .propagation import (
    PropagationModel,
    PropagationSet,
    SceneConfig,
    SimSystem,
    cascade_response,
    exit_matrix,
    interlayer_matrix,
    ue_channel,
)
from .measurement import MeasurementSet, PilotPlan, generate_phase_schedule, measure
from .scenario import Scenario, ScenarioError, bundled_scenarios, load_scenario

__version__ = "0.1.0"
