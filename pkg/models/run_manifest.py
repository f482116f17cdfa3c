"""
Run models: what to stylize (RunManifest), what happened (RunReport), and the
aggregate of a batch (BatchReport).
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from models.enums import MaskProviderKind, ParserKind
from models.errors import InvalidInputError
from models.instruction import ParsedInstruction
from models.loss_breakdown import LossBreakdown


@dataclass(frozen=True)
class RunManifest:
    """
    One stylization request.

    Attributes:
        image_path: Content image
        instruction: Full stylization instruction
        mask_path: Optional grayscale PNG mask
        output_path: Optional output PNG path
        overrides: StyleConfig fields to replace for this run
    """
    image_path: str
    instruction: str
    mask_path: Optional[str] = None
    output_path: Optional[str] = None
    overrides: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Basic shape checks; existence of files is checked at run time."""
        if not self.image_path:
            raise InvalidInputError("Manifest image_path is empty")
        if not isinstance(self.instruction, str) or not self.instruction.strip():
            raise InvalidInputError("Manifest instruction is empty")
        if not isinstance(self.overrides, dict):
            raise InvalidInputError("Manifest overrides must be an object")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'image_path': self.image_path,
            'instruction': self.instruction,
            'mask_path': self.mask_path,
            'output_path': self.output_path,
            'overrides': dict(self.overrides),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        """
        Create RunManifest from a manifest line.

        Raises:
            InvalidInputError: On unknown or missing keys
        """
        if not isinstance(data, dict):
            raise InvalidInputError("Manifest entry must be a JSON object")
        allowed = {'image_path', 'instruction', 'mask_path', 'output_path', 'overrides'}
        unknown = set(data) - allowed
        if unknown:
            raise InvalidInputError(f"Unknown manifest key(s): {', '.join(sorted(unknown))}")
        for key in ('image_path', 'instruction'):
            if key not in data:
                raise InvalidInputError(f"Manifest entry lacks {key}")
        return cls(
            image_path=data['image_path'],
            instruction=data['instruction'],
            mask_path=data.get('mask_path'),
            output_path=data.get('output_path'),
            overrides=data.get('overrides') or {},
        )


@dataclass
class RunReport:
    """
    Outcome of one run.

    Attributes:
        image_path: Content image
        instruction: Instruction as given
        parsed: Split instruction
        parser_used: LLM or FALLBACK
        mask_provider: Mask source used
        final: Last step's losses (None when no step ran)
        loss_history: One breakdown per executed iteration
        wall_time_s: Seconds spent on the run
        output_path: Written PNG
        threshold: Stylization threshold used
    """
    image_path: str
    instruction: str
    parsed: ParsedInstruction
    parser_used: ParserKind
    mask_provider: MaskProviderKind
    final: Optional[LossBreakdown]
    loss_history: List[LossBreakdown]
    wall_time_s: float
    output_path: str
    threshold: float

    @property
    def report_path(self) -> str:
        """JSON report path next to the output image."""
        stem = self.output_path[:-4] if self.output_path.lower().endswith('.png') else self.output_path
        return f"{stem}.report.json"

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'image_path': self.image_path,
            'instruction': self.instruction,
            'parsed': self.parsed.to_dict(),
            'parser_used': self.parser_used.value,
            'mask_provider': self.mask_provider.value,
            'final': self.final.to_dict() if self.final else None,
            'loss_history': [b.to_dict() for b in self.loss_history],
            'wall_time_s': self.wall_time_s,
            'output_path': self.output_path,
            'threshold': self.threshold,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunReport':
        """Create RunReport from dictionary."""
        return cls(
            image_path=data['image_path'],
            instruction=data['instruction'],
            parsed=ParsedInstruction.from_dict(data['parsed']),
            parser_used=ParserKind(data['parser_used']),
            mask_provider=MaskProviderKind(data['mask_provider']),
            final=LossBreakdown.from_dict(data['final']) if data.get('final') else None,
            loss_history=[LossBreakdown.from_dict(b) for b in data.get('loss_history', [])],
            wall_time_s=float(data['wall_time_s']),
            output_path=data['output_path'],
            threshold=float(data['threshold']),
        )


@dataclass
class BatchFailure:
    """A manifest entry that could not be run."""
    index: int
    error: str
    exit_code: int

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {'index': self.index, 'error': self.error, 'exit_code': self.exit_code}


@dataclass
class BatchReport:
    """Aggregate of a batch run, in manifest order."""
    reports: List[RunReport] = field(default_factory=list)
    failures: List[BatchFailure] = field(default_factory=list)

    @property
    def failure_count(self) -> int:
        """Number of failed entries."""
        return len(self.failures)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'succeeded': len(self.reports),
            'failure_count': self.failure_count,
            'reports': [r.to_dict() for r in self.reports],
            'failures': [f.to_dict() for f in self.failures],
        }
