"""
OptimState model - progress of one per-image optimization.
"""

from dataclasses import dataclass, field
from typing import List

from models.loss_breakdown import LossBreakdown


@dataclass
class OptimState:
    """
    Optimization progress.

    Attributes:
        step: Completed steps
        lr: Current step size
        loss_history: One LossBreakdown per completed step
    """
    step: int = 0
    lr: float = 0.0
    loss_history: List[LossBreakdown] = field(default_factory=list)

    def record(self, breakdown: LossBreakdown, lr: float) -> None:
        """Append one finished step."""
        self.loss_history.append(breakdown)
        self.step = len(self.loss_history)
        self.lr = lr

    def moving_average(self, end_step: int, window: int = 10) -> float:
        """
        Mean total loss over the `window` steps ending at `end_step` (1-based).

        Raises:
            ValueError: If end_step is outside the recorded history
        """
        if not 1 <= end_step <= len(self.loss_history):
            raise ValueError(f"Step {end_step} outside history of length {len(self.loss_history)}")
        start = max(0, end_step - window)
        totals = [b.total for b in self.loss_history[start:end_step]]
        return sum(totals) / len(totals)
