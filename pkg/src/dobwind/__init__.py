"""Wind estimation for multirotors from a force observer and a force-air model."""

from .airmodel import ForceAirModel, calibrate, fit_horizontal_model, fit_vertical_model
from .dob import ObserverState, convergence_time_constant, dob_step, observe_log
from .errors import (
    DomainError,
    FitError,
    ParseError,
    SimulationFault,
    StabilityError,
    WindEstimationError,
)
from .evaluation import ErrorReport, evaluate
from .frames import UavParams, UavState
from .pipeline import FilterSchedule, PipelineConfig, estimate_log, estimate_step
from .telemetry import EstimateLog, TelemetryLog, parse_telemetry, write_telemetry

__version__ = "0.1.0"
