"""Shared exception types."""


class StepSynthError(Exception):
    """Base class for all package errors."""


class ParseError(StepSynthError):
    """Malformed surface syntax. Carries the offending position when known."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ExecError(StepSynthError):
    """A program or expression could not be executed on the given value."""


class InvalidUpdate(StepSynthError):
    """A step result cannot extend the specification (e.g. non-prefix)."""

    def __init__(self, message, example_index=None):
        if example_index is not None:
            message = f"{message} (example {example_index})"
        super().__init__(message)
        self.example_index = example_index


class GenerationTimeout(StepSynthError):
    """Task construction exhausted its rejection/budget allowance for a seed."""


class BudgetExceeded(StepSynthError):
    """An enumeration passed its configured evaluation cap."""


class InconsistentSolution(StepSynthError):
    """A task's recorded solution failed to replay (indicates a bug upstream)."""


class NoSolution(StepSynthError):
    """Beam search ended with no solved candidate."""


class ProtocolError(StepSynthError):
    """A wire-protocol message violated the contract."""


class MismatchError(StepSynthError):
    """Results file and dataset file do not describe the same tasks."""
