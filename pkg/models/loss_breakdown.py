"""
LossBreakdown model - per-term loss values of one optimization step.
"""

from dataclasses import dataclass, asdict
from typing import Any, Dict


@dataclass(frozen=True)
class LossBreakdown:
    """
    Unweighted terms plus the weighted total of the objective.

    total = lambda_d*dir + lambda_p*patch + lambda_c*content + lambda_tv*tv
            + t*lambda_m*mask (t dropped when mask weighting is disabled)

    Attributes:
        dir: Global directional loss, in [0, 2]
        patch: Gated patch loss, in [0, 2]
        content: Content loss
        tv: Total-variation loss
        mask: Mask preservation loss
        total: Weighted sum
        patches_used: Patches that passed gating
    """
    dir: float
    patch: float
    content: float
    tv: float
    mask: float
    total: float
    patches_used: int

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LossBreakdown':
        """Create LossBreakdown from dictionary."""
        return cls(
            dir=float(data['dir']),
            patch=float(data['patch']),
            content=float(data['content']),
            tv=float(data['tv']),
            mask=float(data['mask']),
            total=float(data['total']),
            patches_used=int(data['patches_used']),
        )
