"""Exception taxonomy shared across the toolkit."""


class WgainError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(WgainError, ValueError):
    """A user-supplied value violates its documented range or format."""


class ContractError(WgainError):
    """An internal call broke a documented precondition (caller bug)."""


class IngestionError(WgainError):
    """A data file or directory could not be read or decoded."""


class DivergenceError(WgainError):
    """Training produced a non-finite objective; carries the offending report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CheckpointError(WgainError):
    """A checkpoint is missing, corrupt, or does not match the expected config."""
