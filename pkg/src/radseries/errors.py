"""Exception hierarchy shared by every module."""


class RadseriesError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InputError(RadseriesError, ValueError):
    """Malformed argument, dimension mismatch or invalid configuration."""

    exit_code = 1


class UnsupportedError(InputError):
    """The requested operation is not available for this space or mode."""


class CapacityError(RadseriesError):
    """An exact enumeration would exceed its configured size limit."""

    exit_code = 3


class StageError(RadseriesError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
