from typing import List, Optional

from config import EXIT_CODES


class LasiqError(Exception):
    """Base class for all domain errors"""

    exit_code = EXIT_CODES["computation_error"]


class ParameterError(LasiqError, ValueError):
    exit_code = EXIT_CODES["parameter_error"]


class ValidationError(LasiqError, ValueError):
    """Invariant violation on a chip, plan or config, naming the offending item"""

    exit_code = EXIT_CODES["parameter_error"]

    def __init__(self, message: str, item: Optional[str] = None):
        super().__init__(message)
        self.item = item


class ChipParseError(LasiqError, ValueError):
    exit_code = EXIT_CODES["parameter_error"]

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class SingularFitError(LasiqError):
    pass


class FitError(LasiqError):
    pass


class MonotonicityError(LasiqError, ValueError):
    """Target requires a resistance decrease; annealing only increases R"""


class CalibrationError(LasiqError):
    pass


class SolverError(LasiqError):
    pass


class InfeasiblePlanError(LasiqError):
    def __init__(self, message: str, blocking: List[int]):
        super().__init__(message)
        self.blocking = list(blocking)


class PipelineError(LasiqError):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code
