"""Exception hierarchy shared by every layer of the package."""

from typing import Any, Dict, Optional


class TransDAError(Exception):
    """Base error. ``exit_code`` is what the CLI returns when it escapes."""

    exit_code: int = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigError(TransDAError):
    """Invalid configuration value, unknown key or bad CLI usage."""

    exit_code = 1


class ContractError(TransDAError):
    """A documented precondition or postcondition was violated."""

    exit_code = 1


class DimensionError(ContractError):
    """Shape mismatch inside an op."""

    def __init__(self, op: str, *shapes: Any, reason: str = ""):
        shape_text = ", ".join(str(tuple(s)) for s in shapes)
        message = f"{op}: incompatible shapes {shape_text}"
        if reason:
            message = f"{message} ({reason})"
        super().__init__(message, {"op": op, "shapes": [tuple(s) for s in shapes]})
        self.op = op


class NumericDomainError(ContractError):
    """An op received values outside its mathematical domain."""


class DataFormatError(TransDAError):
    """Corrupt or truncated dataset / checkpoint file."""

    exit_code = 2

    def __init__(
        self,
        message: str,
        offset: Optional[int] = None,
        expected: Optional[int] = None,
        actual: Optional[int] = None,
    ):
        if offset is not None:
            message = f"{message} at byte offset {offset}"
        if expected is not None and actual is not None:
            message = f"{message}: expected {expected} bytes, got {actual}"
        super().__init__(message, {"offset": offset, "expected": expected, "actual": actual})
        self.offset = offset
        self.expected = expected
        self.actual = actual


class ManifestError(TransDAError):
    """Checkpoint architecture does not match the requested model."""

    exit_code = 2
