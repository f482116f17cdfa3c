"""
BackendDescriptor model - selects and parameterizes a perception backend.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

from models.enums import BackendKind
from models.errors import InvalidInputError


@dataclass(frozen=True)
class BackendDescriptor:
    """
    Perception backend selection.

    Attributes:
        kind: REAL (CLIP-compatible checkpoint) or MOCK (seeded linear map)
        dim: Embedding dimension
        weights_path: Checkpoint file, required for REAL
        seed: Seed of the mock projection
        input_resolution: Square side the backend's image encoder consumes
    """
    kind: BackendKind = BackendKind.MOCK
    dim: int = 512
    weights_path: Optional[str] = None
    seed: int = 0
    input_resolution: int = 32

    def __post_init__(self) -> None:
        """Validate descriptor invariants."""
        if self.dim <= 0:
            raise InvalidInputError(f"Backend dim must be positive, got {self.dim}")
        if self.input_resolution < 8:
            raise InvalidInputError(
                f"Backend input_resolution must be >= 8, got {self.input_resolution}"
            )
        if self.kind == BackendKind.REAL and not self.weights_path:
            raise InvalidInputError("Real backend requires weights_path")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'kind': self.kind.value,
            'dim': self.dim,
            'weights_path': self.weights_path,
            'seed': self.seed,
            'input_resolution': self.input_resolution,
        }
