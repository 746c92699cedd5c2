"""Exception types shared across the toolkit."""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for pmcal-specific failures."""


class ConfigurationError(ToolkitError):
    """Caller supplied inconsistent or incomplete configuration."""


class SingularDesignError(ToolkitError):
    """Regression design matrix is rank deficient."""


class UnsupportedModelError(ToolkitError):
    """Operation is not defined for the requested model kind."""


class StageError(ToolkitError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
