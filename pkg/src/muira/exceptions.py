"""Exception classes for the muira toolkit.

Every error carries a process exit code so the CLI can map failures to
distinct statuses, and one optional context attribute that is folded into
the message (the same shape the MCP layer forwards as error data).
"""

# Process exit codes
EXIT_OK = 0
EXIT_GENERIC = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4
EXIT_UNKNOWN_PRESET = 5


class MuiraError(Exception):
    """Base class for all toolkit errors.

    Attributes:
        message: Error message as passed by the caller
        exit_code: Process exit status the CLI uses for this error
    """

    exit_code = EXIT_GENERIC

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message

    @property
    def data(self) -> dict | None:
        """Structured context for machine-readable error reports."""
        return None


class ConfigError(MuiraError, ValueError):
    """Raised when a configuration or parameter value is invalid.

    This covers malformed config files, unknown keys, and parameter values
    outside their documented range (negative variances, zero dimensions).

    Attributes:
        field: The field that failed validation (optional)
        reason: The message without the field prefix
    """

    exit_code = EXIT_CONFIG

    def __init__(self, message: str, field: str | None = None) -> None:
        if field:
            full_message = f"Invalid configuration for '{field}': {message}"
        else:
            full_message = f"Invalid configuration: {message}"
        super().__init__(full_message)
        self.field = field
        self.reason = message

    @property
    def data(self) -> dict | None:
        return {"field": self.field} if self.field else None


class UnknownPresetError(MuiraError, KeyError):
    """Raised when a code preset name is not shipped with the toolkit.

    Attributes:
        name: The preset name that was requested
    """

    exit_code = EXIT_UNKNOWN_PRESET

    def __init__(self, name: str) -> None:
        super().__init__(f"Unknown code preset: '{name}'")
        self.name = name

    def __str__(self) -> str:
        # KeyError would otherwise repr() the message
        return self.message

    @property
    def data(self) -> dict | None:
        return {"name": self.name}


class InfeasibleError(MuiraError):
    """Raised when a request cannot be satisfied by any valid answer.

    Examples are a preset simulated at dimensions it was not designed for,
    a search window that does not bracket its target, or an optimizer budget
    that found no code with an open tunnel.

    Attributes:
        details: Additional detail about the infeasibility (optional)
    """

    exit_code = EXIT_INFEASIBLE

    def __init__(self, message: str, details: str | None = None) -> None:
        full_message = f"{message}: {details}" if details else message
        super().__init__(full_message)
        self.details = details

    @property
    def data(self) -> dict | None:
        return {"details": self.details} if self.details else None


class CodeConstructionError(InfeasibleError):
    """Raised when degree quantization cannot produce a valid Tanner graph."""


class ConvergenceError(InfeasibleError):
    """Raised when an iteration ends without a verdict where one is required."""


class NumericalError(MuiraError):
    """Raised on non-finite messages or a normal matrix that is not SPD.

    Attributes:
        details: Diagnostic detail, e.g. where the first NaN appeared (optional)
    """

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, details: str | None = None) -> None:
        full_message = f"{message}: {details}" if details else message
        super().__init__(full_message)
        self.details = details

    @property
    def data(self) -> dict | None:
        return {"details": self.details} if self.details else None


class DomainError(MuiraError, ValueError):
    """Raised when a formula is evaluated outside its domain of validity.

    Attributes:
        field: The argument that is out of domain (optional)
    """

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, field: str | None = None) -> None:
        if field:
            full_message = f"Out of domain for '{field}': {message}"
        else:
            full_message = f"Out of domain: {message}"
        super().__init__(full_message)
        self.field = field
        self.reason = message

    @property
    def data(self) -> dict | None:
        return {"field": self.field} if self.field else None
