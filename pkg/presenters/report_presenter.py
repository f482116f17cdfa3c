"""
ReportPresenter - text formatting of optimization progress and run outcomes.

Used by the optimizer for its periodic log line and by the CLI for summaries.
"""

from typing import List

from models.instruction import EvalReport
from models.loss_breakdown import LossBreakdown
from models.optim_state import OptimState
from models.run_manifest import BatchReport, RunReport


class ReportPresenter:
    """
    Formatting of losses, reports and evaluation tables.

    Attributes:
        precision: Significant digits for loss values
    """

    def __init__(self, precision: int = 4):
        """
        Initialize presenter.

        Args:
            precision: Significant digits used for loss values
        """
        self.precision = precision

    def format_value(self, value: float) -> str:
        """Loss value with the configured significant digits."""
        return f"{value:.{self.precision}g}"

    def format_breakdown(self, breakdown: LossBreakdown) -> str:
        """
        One-line view of all terms.

        Returns:
            e.g. "total=12.5 dir=1 patch=0.8 content=0.001 tv=0.02 mask=0 patches=12"
        """
        fmt = self.format_value
        return (
            f"total={fmt(breakdown.total)} dir={fmt(breakdown.dir)} "
            f"patch={fmt(breakdown.patch)} content={fmt(breakdown.content)} "
            f"tv={fmt(breakdown.tv)} mask={fmt(breakdown.mask)} "
            f"patches={breakdown.patches_used}"
        )

    def format_step(self, step: int, iterations: int, breakdown: LossBreakdown, lr: float) -> str:
        """
        Progress line logged every few optimization steps.

        Args:
            step: 1-based step just completed
            iterations: Total steps of the run
            breakdown: Losses of that step
            lr: Step size used

        Returns:
            e.g. "step 20/200 lr=0.0005 total=..."
        """
        return f"step {step}/{iterations} lr={lr:.3g} {self.format_breakdown(breakdown)}"

    def format_duration(self, seconds: float) -> str:
        """Wall time as "0.8s", "42.1s" or "3m 05s"."""
        if seconds < 60:
            return f"{seconds:.1f}s"
        minutes, rest = divmod(int(round(seconds)), 60)
        return f"{minutes}m {rest:02d}s"

    def get_loss_trend(self, state: OptimState, window: int = 10) -> str:
        """
        Direction of the moving-average total loss over the run.

        Returns:
            "decreasing", "flat", "increasing", or "n/a" for short histories
        """
        if len(state.loss_history) < window:
            return "n/a"
        early = state.moving_average(window, window)
        late = state.moving_average(len(state.loss_history), window)
        if late < early * 0.99:
            return "decreasing"
        if late > early * 1.01:
            return "increasing"
        return "flat"

    def format_run_summary(self, report: RunReport) -> str:
        """Multi-line summary of one finished run."""
        lines = [
            f"Stylized {report.image_path} -> {report.output_path}",
            f"  content: {report.parsed.stylized_content!r} ({report.parser_used.value} parser)",
            f"  objects: {report.parsed.stylized_objects!r} ({report.mask_provider.value} mask)",
            f"  threshold: {report.threshold:g}, steps: {len(report.loss_history)}, "
            f"time: {self.format_duration(report.wall_time_s)}",
        ]
        if report.final is not None:
            lines.append(f"  final: {self.format_breakdown(report.final)}")
        return "\n".join(lines)

    def format_eval_report(self, report: EvalReport) -> str:
        """Per-item table followed by the accuracy line."""
        lines: List[str] = []
        for item in report.per_item:
            mark = "OK " if item.matched else "MISS"
            if item.predicted is not None:
                got = f"{item.predicted.stylized_content!r} | {item.predicted.stylized_objects!r}"
            else:
                got = f"error: {item.error}"
            score = f" [judge {item.judge_score:g}]" if item.judge_score is not None else ""
            lines.append(f"{mark} {item.instruction}\n     -> {got}{score}")
        lines.append(
            f"Exact match: {report.exact_matches}/{report.total} ({100 * report.accuracy:.1f}%)"
        )
        if report.judge_mean is not None:
            lines.append(f"Mean judge score: {report.judge_mean:.2f}/10")
        return "\n".join(lines)

    def format_batch_summary(self, batch: BatchReport) -> str:
        """Counts plus one line per failed entry."""
        lines = [f"Batch finished: {len(batch.reports)} succeeded, {batch.failure_count} failed"]
        for failure in batch.failures:
            lines.append(f"  entry {failure.index}: exit {failure.exit_code}: {failure.error}")
        return "\n".join(lines)
