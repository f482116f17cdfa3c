"""
Enumeration types for the stylize engine.

Values double as the strings accepted in config files, manifests and CLI flags.
"""

from enum import Enum, IntEnum


class BackendKind(Enum):
    """Perception backend flavour."""
    REAL = "real"
    MOCK = "mock"


class MaskProviderKind(Enum):
    """Where the target-object mask comes from."""
    EXTERNAL_MODEL = "external_model"
    FILE = "file"
    SYNTHETIC = "synthetic"


class MaskShape(Enum):
    """Synthetic mask shapes."""
    RECT = "rect"
    ELLIPSE = "ellipse"


class CompositeMode(Enum):
    """Optional post-process blend of the stylized output with the content."""
    OFF = "off"
    SOFT = "soft"
    HARD = "hard"


class ParserKind(Enum):
    """Which parser produced a ParsedInstruction."""
    LLM = "llm"
    FALLBACK = "fallback"


class ExitCode(IntEnum):
    """Process exit codes of the stylize command."""
    OK = 0
    CONFIG = 1
    IO = 2
    PARSE = 3
    BACKEND = 4
    NUMERIC = 5
