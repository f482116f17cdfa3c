"""
Error hierarchy for the stylize engine.

Every error carries the process exit code the CLI returns for it, so each
failure path maps to exactly one code.
"""

from typing import Optional

from models.enums import ExitCode


class StylizeError(Exception):
    """Base class for all expected failures."""
    exit_code: ExitCode = ExitCode.CONFIG


class ConfigurationError(StylizeError):
    """Bad or unknown configuration, or no usable source for a required input."""
    exit_code = ExitCode.CONFIG


class InvalidInputError(StylizeError, ValueError):
    """An argument violates an operation's precondition."""
    exit_code = ExitCode.CONFIG


class ImageIOError(StylizeError):
    """An image could not be read or written."""
    exit_code = ExitCode.IO


class InstructionParseError(StylizeError):
    """An instruction or model response could not be split."""
    exit_code = ExitCode.PARSE

    def __init__(self, message: str, key: Optional[str] = None) -> None:
        super().__init__(message)
        self.key = key


class MissingFieldError(InstructionParseError):
    """A JSON response lacks one of the required keys, or it is empty."""


class NoMatchError(InstructionParseError):
    """No rule-based pattern matched the instruction."""


class EndpointError(StylizeError):
    """A chat-completion endpoint failed or returned a non-success status."""
    exit_code = ExitCode.BACKEND

    def __init__(self, message: str, status: Optional[int] = None) -> None:
        super().__init__(message)
        self.status = status


class BackendError(StylizeError):
    """A perception backend could not be loaded or used."""
    exit_code = ExitCode.BACKEND


class ProviderError(StylizeError):
    """A mask provider failed to produce a mask."""
    exit_code = ExitCode.BACKEND


class MaskFileError(ProviderError):
    """A mask file is missing, unreadable or has the wrong size."""
    exit_code = ExitCode.IO


class NumericError(StylizeError):
    """A loss term became non-finite during optimization."""
    exit_code = ExitCode.NUMERIC

    def __init__(self, message: str, term: str, step: int) -> None:
        super().__init__(message)
        self.term = term
        self.step = step
