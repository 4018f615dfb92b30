"""Exception types raised by the estimation library."""


class WindEstimationError(Exception):
    """Base class for data and model faults (CLI exit code 2)."""


class DomainError(WindEstimationError, ValueError):
    """An input lies outside the domain an operation accepts."""


class StabilityError(WindEstimationError, ValueError):
    """Observer parameters violate the discrete stability condition."""


class SimulationFault(WindEstimationError, RuntimeError):
    """The plant simulation produced a non-finite or divergent state."""


class FitError(WindEstimationError, ValueError):
    """A calibration dataset cannot support the requested fit."""


class ParseError(WindEstimationError, ValueError):
    """A telemetry, estimate, model or config file is malformed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
