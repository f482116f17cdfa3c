"""
Mask provider models: which source produces the target mask, and the shape
spec of synthetic masks.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

from models.enums import MaskProviderKind, MaskShape
from models.errors import InvalidInputError


@dataclass(frozen=True)
class SyntheticShape:
    """
    Rectangle or ellipse in normalized [0, 1] image coordinates.

    Attributes:
        shape: RECT or ELLIPSE
        cx, cy: Center
        w, h: Full width and height
    """
    shape: MaskShape = MaskShape.RECT
    cx: float = 0.5
    cy: float = 0.5
    w: float = 1.0
    h: float = 1.0

    def __post_init__(self) -> None:
        """Coordinates must be normalized."""
        for name in ('cx', 'cy', 'w', 'h'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidInputError(f"Synthetic mask {name}={value} outside [0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {'shape': self.shape.value, 'cx': self.cx, 'cy': self.cy, 'w': self.w, 'h': self.h}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SyntheticShape':
        """Create a shape from its config form."""
        unknown = set(data) - {'shape', 'cx', 'cy', 'w', 'h'}
        if unknown:
            raise InvalidInputError(f"Unknown synthetic mask key(s): {', '.join(sorted(unknown))}")
        try:
            shape = MaskShape(data.get('shape', 'rect'))
        except ValueError as exc:
            raise InvalidInputError(f"Unknown synthetic mask shape {data.get('shape')!r}") from exc
        return cls(
            shape=shape,
            cx=float(data.get('cx', 0.5)),
            cy=float(data.get('cy', 0.5)),
            w=float(data.get('w', 1.0)),
            h=float(data.get('h', 1.0)),
        )


@dataclass(frozen=True)
class MaskProviderSpec:
    """
    One mask source; exactly one kind's parameters are populated.

    Attributes:
        kind: EXTERNAL_MODEL, FILE or SYNTHETIC
        model_endpoint: HTTP endpoint of a referring-segmentation model
        model_checkpoint: TorchScript file of a referring-segmentation model
        file_path: Grayscale PNG mask
        synthetic: Shape spec for synthetic masks
    """
    kind: MaskProviderKind
    model_endpoint: Optional[str] = None
    model_checkpoint: Optional[str] = None
    file_path: Optional[str] = None
    synthetic: Optional[SyntheticShape] = None

    def __post_init__(self) -> None:
        """Exactly the chosen kind's parameters may be set."""
        model_set = bool(self.model_endpoint) or bool(self.model_checkpoint)
        populated = {
            MaskProviderKind.EXTERNAL_MODEL: model_set,
            MaskProviderKind.FILE: bool(self.file_path),
            MaskProviderKind.SYNTHETIC: self.synthetic is not None,
        }
        if not populated[self.kind]:
            raise InvalidInputError(f"Mask provider {self.kind.value} has no parameters")
        others = [kind.value for kind, is_set in populated.items() if is_set and kind != self.kind]
        if others:
            raise InvalidInputError(
                f"Mask provider {self.kind.value} also carries parameters for: {', '.join(others)}"
            )
        if self.model_endpoint and self.model_checkpoint:
            raise InvalidInputError("Give either a model endpoint or a checkpoint, not both")
