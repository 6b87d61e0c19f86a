"""Custom exception classes for the MCP server.

Toolkit errors (:class:`muira.exceptions.MuiraError`) are converted into
McpError subclasses so clients receive JSON-RPC error codes.
"""

from mcp import McpError
from mcp.shared.exceptions import ErrorData

from muira.exceptions import (
    ConfigError,
    DomainError,
    MuiraError,
    UnknownPresetError,
)

# Error codes for custom exceptions
ERROR_CODE_NOT_FOUND = -32602  # Preset not found
ERROR_CODE_COMPUTATION_ERROR = -32603  # Infeasible or numerical failure
ERROR_CODE_VALIDATION_ERROR = -32604  # Validation error


class PresetNotFoundError(McpError):
    """Exception raised when a code preset name is unknown.

    Attributes:
        name: The preset name that was requested (optional)
    """

    def __init__(self, message: str, name: str | None = None) -> None:
        if name:
            full_message = f"{message} (preset: {name})"
        else:
            full_message = message

        error_data = ErrorData(
            code=ERROR_CODE_NOT_FOUND,
            message=full_message,
            data={"name": name} if name else None,
        )
        super().__init__(error_data)
        self.name = name


class ComputationError(McpError):
    """Exception raised when a computation cannot produce an answer.

    This covers non-bracketing search windows, infeasible dimensions and
    numerical failures inside the detector or decoder.

    Attributes:
        details: Additional error details (optional)
    """

    def __init__(self, message: str, details: str | None = None) -> None:
        if details:
            full_message = f"{message}: {details}"
        else:
            full_message = message

        error_data = ErrorData(
            code=ERROR_CODE_COMPUTATION_ERROR,
            message=full_message,
            data={"details": details} if details else None,
        )
        super().__init__(error_data)
        self.details = details


class ParameterValidationError(McpError):
    """Exception raised when a tool argument is invalid.

    Attributes:
        field: The field that failed validation (optional)
    """

    def __init__(self, message: str, field: str | None = None) -> None:
        if field:
            full_message = f"Validation failed for '{field}': {message}"
        else:
            full_message = f"Validation failed: {message}"

        error_data = ErrorData(
            code=ERROR_CODE_VALIDATION_ERROR,
            message=full_message,
            data={"field": field} if field else None,
        )
        super().__init__(error_data)
        self.field = field


def to_mcp_error(error: MuiraError) -> McpError:
    """Map a toolkit error onto the matching McpError subclass."""
    if isinstance(error, UnknownPresetError):
        return PresetNotFoundError("Unknown code preset", name=error.name)
    if isinstance(error, ConfigError | DomainError):
        return ParameterValidationError(error.reason, field=error.field)
    return ComputationError(error.message)
