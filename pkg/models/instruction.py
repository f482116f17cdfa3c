"""
Instruction models: the raw command, its parsed split, and parser evaluation.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from models.errors import InvalidInputError


@dataclass(frozen=True)
class RawInstruction:
    """
    The user's full stylization command.

    Attributes:
        text: Command text; must be non-empty after trimming
    """
    text: str

    def __post_init__(self) -> None:
        """Reject empty or whitespace-only instructions."""
        if not isinstance(self.text, str) or not self.text.strip():
            raise InvalidInputError("Instruction text is empty")


@dataclass(frozen=True)
class ParsedInstruction:
    """
    The (style, target object) split of an instruction.

    Attributes:
        stylized_content: The style to apply, e.g. "art on fire"
        stylized_objects: Referring expression for the target object
    """
    stylized_content: str
    stylized_objects: str

    def __post_init__(self) -> None:
        """Trim both fields and reject empty ones."""
        for name in ('stylized_content', 'stylized_objects'):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise InvalidInputError(f"ParsedInstruction.{name} is empty")
            object.__setattr__(self, name, value.strip())

    def matches(self, other: 'ParsedInstruction') -> bool:
        """Exact-match rule used for corpus scoring: trimmed, case-insensitive."""
        return (
            self.stylized_content.lower() == other.stylized_content.lower()
            and self.stylized_objects.lower() == other.stylized_objects.lower()
        )

    def to_dict(self) -> Dict[str, str]:
        """Convert to dictionary for JSON serialization."""
        return {
            'stylized_content': self.stylized_content,
            'stylized_objects': self.stylized_objects,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ParsedInstruction':
        """Create ParsedInstruction from dictionary."""
        return cls(
            stylized_content=data['stylized_content'],
            stylized_objects=data['stylized_objects'],
        )


@dataclass
class EvalItem:
    """One scored corpus entry."""
    instruction: str
    gold: ParsedInstruction
    predicted: Optional[ParsedInstruction]
    matched: bool
    error: Optional[str] = None
    judge_score: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'instruction': self.instruction,
            'gold': self.gold.to_dict(),
            'predicted': self.predicted.to_dict() if self.predicted else None,
            'matched': self.matched,
            'error': self.error,
            'judge_score': self.judge_score,
        }


@dataclass
class EvalReport:
    """
    Exact-match evaluation of a parser over a gold corpus.

    Attributes:
        total: Number of corpus items
        exact_matches: Items whose prediction equals gold
        per_item: Per-instruction detail
        judge_mean: Mean judge score, when a judge was used
    """
    total: int
    exact_matches: int
    per_item: List[EvalItem] = field(default_factory=list)
    judge_mean: Optional[float] = None

    def __post_init__(self) -> None:
        """Check the count invariants."""
        if self.total <= 0:
            raise InvalidInputError("EvalReport.total must be positive")
        if not 0 <= self.exact_matches <= self.total:
            raise InvalidInputError(
                f"exact_matches {self.exact_matches} outside [0, {self.total}]"
            )

    @property
    def accuracy(self) -> float:
        """Fraction of exact matches."""
        return self.exact_matches / self.total

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'total': self.total,
            'exact_matches': self.exact_matches,
            'accuracy': self.accuracy,
            'judge_mean': self.judge_mean,
            'per_item': [item.to_dict() for item in self.per_item],
        }
