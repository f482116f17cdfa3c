"""Models package initialization."""

from models.enums import BackendKind, CompositeMode, ExitCode, MaskProviderKind, MaskShape, ParserKind
from models.errors import StylizeError
from models.instruction import ParsedInstruction, RawInstruction
from models.loss_breakdown import LossBreakdown
from models.style_config import EndpointConfig, RunSettings, StyleConfig

__all__ = [
    'BackendKind', 'CompositeMode', 'ExitCode', 'MaskProviderKind', 'MaskShape', 'ParserKind',
    'StylizeError', 'ParsedInstruction', 'RawInstruction', 'LossBreakdown',
    'EndpointConfig', 'RunSettings', 'StyleConfig',
]
