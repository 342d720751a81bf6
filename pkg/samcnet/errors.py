"""
Exception hierarchy shared by every subsystem.

Each concrete error also derives from the builtin it specializes, so
callers that only know about ValueError / ArithmeticError still catch it.
"""

from __future__ import annotations


class SamcnetError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(SamcnetError, ValueError):
    """A precondition of an operation was not met (shape, index, size...)."""


class NumericError(SamcnetError, ArithmeticError):
    """An operation produced NaN or Inf from finite inputs."""

    def __init__(self, op: str, detail: str = "non-finite output") -> None:
        super().__init__(f"{op}: {detail}")
        self.op = op


class ParseError(SamcnetError, ValueError):
    """Malformed input file. The message carries the file and line number."""

    def __init__(self, path: str, line: int, detail: str) -> None:
        super().__init__(f"{path}:{line}: {detail}")
        self.path = path
        self.line = line


class ConfigError(SamcnetError, ValueError):
    """Invalid or unknown configuration value."""


class CheckpointError(SamcnetError, ValueError):
    """Checkpoint file is corrupt, from another version, or shape-mismatched."""
