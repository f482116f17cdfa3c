"""
Stylization pipeline: parse the instruction, get the object mask, optimize,
write the PNG and its JSON report. Batch mode runs manifest entries in
isolation, optionally in parallel.
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, List, Optional, Tuple, Union

import httpx

from models.enums import CompositeMode, ExitCode, ParserKind
from models.errors import (
    ConfigurationError,
    EndpointError,
    ImageIOError,
    InstructionParseError,
    InvalidInputError,
    StylizeError,
)
from models.instruction import ParsedInstruction, RawInstruction
from models.run_manifest import BatchFailure, BatchReport, RunManifest, RunReport
from models.style_config import RunSettings, StyleConfig
from presenters.report_presenter import ReportPresenter
from services.data_persistence import atomic_write_json, iter_jsonl
from services.image_io import load_image, read_image_size, save_image
from services.instruction_parser import fallback_split, make_llm_parser
from services.optimizer import composite, optimize
from services.perception import load_backend, PerceptionBackend
from services.segmentation import ExternalModelMaskSource, FileMaskSource, get_mask, MaskSource

logger = logging.getLogger(__name__)

BATCH_REPORT_NAME = 'batch_report.json'


def default_output_path(image_path: str, output_dir: Optional[str] = None,
                        index: Optional[int] = None) -> str:
    """
    Output PNG path for a run without an explicit one.

    Single runs write "<image dir>/<stem>_stylized.png"; batch entries write
    "<output dir>/<stem>_<index:03d>.png".
    """
    stem = os.path.splitext(os.path.basename(image_path))[0]
    if index is None:
        return os.path.join(os.path.dirname(image_path), f"{stem}_stylized.png")
    return os.path.join(output_dir or '.', f"{stem}_{index:03d}.png")


def sweep_output_path(base_path: str, threshold: float) -> str:
    """"out.png" at t=0.7 -> "out_t0.70.png"."""
    stem, ext = os.path.splitext(base_path)
    return f"{stem}_t{threshold:.2f}{ext or '.png'}"


class StylizePipeline:
    """
    Runs manifests against one set of settings.

    The perception backend is loaded once and shared read-only by all runs;
    every run owns its network, optimizer and generator.

    Attributes:
        settings: Run settings
        presenter: Formats log lines and summaries
    """

    def __init__(
        self,
        settings: RunSettings,
        backend: Optional[PerceptionBackend] = None,
        llm_transport: Optional[httpx.BaseTransport] = None,
        mask_transport: Optional[httpx.BaseTransport] = None,
        presenter: Optional[ReportPresenter] = None
    ):
        """
        Initialize pipeline.

        Args:
            settings: Run settings
            backend: Preloaded backend; loaded from settings.backend when None
            llm_transport: httpx transport for the LLM endpoint (tests)
            mask_transport: httpx transport for the mask endpoint (tests)
            presenter: Formatter for log lines
        """
        self.settings = settings
        self._backend = backend
        self._llm_transport = llm_transport
        self._mask_transport = mask_transport
        self.presenter = presenter or ReportPresenter()

    @property
    def backend(self) -> PerceptionBackend:
        """Perception backend, loaded on first use."""
        if self._backend is None:
            self._backend = load_backend(self.settings.backend)
        return self._backend

    def parse_instruction(self, raw: RawInstruction) -> Tuple[ParsedInstruction, ParserKind]:
        """
        Split with the LLM when an endpoint is configured, else (or when the
        LLM call fails) with the rule-based fallback.

        Raises:
            NoMatchError: If the fallback is needed and no pattern matches
        """
        if self.settings.endpoint is not None:
            try:
                parser = make_llm_parser(self.settings.endpoint, transport=self._llm_transport)
                return parser(raw), ParserKind.LLM
            except (EndpointError, InstructionParseError) as exc:
                logger.warning("LLM parse failed (%s); using the rule-based parser", exc)
        return fallback_split(raw), ParserKind.FALLBACK

    def mask_source(self, manifest: RunManifest) -> MaskSource:
        """
        Mask source for a run: the manifest's mask file, else the configured
        segmentation model, else the configured synthetic shape.

        Raises:
            ConfigurationError: If no source is available
        """
        if manifest.mask_path:
            # mask files match the image as stored, before the image_size cap
            return FileMaskSource(manifest.mask_path, source_size=read_image_size(manifest.image_path))
        if self.settings.mask_model_checkpoint:
            return ExternalModelMaskSource.from_checkpoint(self.settings.mask_model_checkpoint)
        if self.settings.mask_model_endpoint:
            return ExternalModelMaskSource.from_endpoint(
                self.settings.mask_model_endpoint, transport=self._mask_transport
            )
        if self.settings.mask_synthetic is not None:
            from mocks.synthetic_masks import SyntheticMaskSource  # pylint: disable=import-outside-toplevel
            return SyntheticMaskSource(self.settings.mask_synthetic)
        raise ConfigurationError(
            "No mask source: pass --mask, configure mask_model_endpoint or "
            "mask_model_checkpoint, or set mask_synthetic"
        )

    def style_for(self, manifest: RunManifest) -> StyleConfig:
        """Settings' StyleConfig with the manifest's overrides applied."""
        try:
            return self.settings.style.with_overrides(manifest.overrides)
        except (InvalidInputError, TypeError) as exc:
            raise ConfigurationError(f"Bad overrides for {manifest.image_path}: {exc}") from exc

    def run(self, manifest: RunManifest) -> RunReport:
        """
        Execute one manifest end to end.

        Raises:
            StylizeError: Any failure, carrying its exit code
        """
        started = time.perf_counter()
        cfg = self.style_for(manifest)
        image = load_image(manifest.image_path, max_side=self.settings.image_size)

        raw = RawInstruction(manifest.instruction)
        parsed, parser_used = self.parse_instruction(raw)
        logger.info("Instruction split: content=%r objects=%r (%s)",
                    parsed.stylized_content, parsed.stylized_objects, parser_used.value)

        source = self.mask_source(manifest)
        mask = get_mask(image, parsed.stylized_objects, source)

        stylized, state = optimize(
            image, parsed, mask, cfg, self.backend,
            log_every=self.settings.log_every, presenter=self.presenter,
        )
        if self.settings.composite != CompositeMode.OFF:
            stylized = composite(stylized, image, mask, hard=self.settings.composite == CompositeMode.HARD)

        output_path = manifest.output_path or default_output_path(manifest.image_path)
        save_image(stylized, output_path)

        report = RunReport(
            image_path=manifest.image_path,
            instruction=manifest.instruction,
            parsed=parsed,
            parser_used=parser_used,
            mask_provider=source.kind,
            final=state.loss_history[-1] if state.loss_history else None,
            loss_history=state.loss_history,
            wall_time_s=time.perf_counter() - started,
            output_path=output_path,
            threshold=cfg.threshold,
        )
        if not atomic_write_json(report.report_path, report.to_dict()):
            raise ImageIOError(f"Cannot write report {report.report_path}")
        logger.info("Wrote %s and %s", output_path, report.report_path)
        return report

    def _run_entry(self, index: int, entry: Union[RunManifest, StylizeError]) -> Union[RunReport, BatchFailure]:
        if isinstance(entry, StylizeError):
            return BatchFailure(index=index, error=str(entry), exit_code=int(entry.exit_code))
        try:
            return self.run(entry)
        except StylizeError as exc:
            logger.error("Batch entry %d failed: %s", index, exc)
            return BatchFailure(index=index, error=str(exc), exit_code=int(exc.exit_code))
        except Exception as exc:  # pylint: disable=broad-except
            logger.exception("Batch entry %d crashed", index)
            return BatchFailure(index=index, error=repr(exc), exit_code=int(ExitCode.BACKEND))

    def run_batch(self, manifest_path: str) -> BatchReport:
        """
        Run every manifest entry; failures are recorded, never fatal.

        Entries run on up to settings.jobs threads; results keep manifest order.
        The aggregate is written to "<output_dir>/batch_report.json".

        Raises:
            ConfigurationError: Manifest file missing, empty or without a single
                JSON object line; other bad lines are recorded as failures
        """
        entries = self._read_manifest(manifest_path)
        if any(isinstance(entry, RunManifest) for entry in entries):
            logger.debug("Batch shares the %s backend", type(self.backend).__name__)

        if self.settings.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.settings.jobs) as executor:
                outcomes = list(executor.map(self._run_entry, range(len(entries)), entries))
        else:
            outcomes = [self._run_entry(index, entry) for index, entry in enumerate(entries)]

        batch = BatchReport(
            reports=[o for o in outcomes if isinstance(o, RunReport)],
            failures=[o for o in outcomes if isinstance(o, BatchFailure)],
        )
        aggregate = os.path.join(self.settings.output_dir, BATCH_REPORT_NAME)
        if not atomic_write_json(aggregate, batch.to_dict()):
            raise ImageIOError(f"Cannot write batch report {aggregate}")
        logger.info(self.presenter.format_batch_summary(batch))
        return batch

    def _read_manifest(self, manifest_path: str) -> List[Union[RunManifest, StylizeError]]:
        try:
            records = list(iter_jsonl(manifest_path))
        except OSError as exc:
            raise ConfigurationError(f"Cannot read manifest {manifest_path}: {exc}") from exc
        if not records:
            raise ConfigurationError(f"Manifest {manifest_path} is empty")
        if all(isinstance(record, ValueError) for _, record in records):
            raise ConfigurationError(f"Manifest {manifest_path} has no valid entries: {records[0][1]}")

        entries: List[Union[RunManifest, StylizeError]] = []
        for index, (_, record) in enumerate(records):
            if isinstance(record, ValueError):
                logger.warning("Skipping manifest entry %d: %s", index, record)
                entries.append(InvalidInputError(str(record)))
                continue
            try:
                manifest = RunManifest.from_dict(record)
            except InvalidInputError as exc:
                entries.append(exc)
                continue
            if not manifest.output_path:
                manifest = RunManifest(
                    image_path=manifest.image_path,
                    instruction=manifest.instruction,
                    mask_path=manifest.mask_path,
                    output_path=default_output_path(manifest.image_path, self.settings.output_dir, index),
                    overrides=manifest.overrides,
                )
            entries.append(manifest)
        return entries

    def run_threshold_sweep(self, manifest: RunManifest, thresholds: Iterable[float]) -> List[RunReport]:
        """
        Rerun one manifest at several thresholds, writing "<stem>_t0.70.png"
        style outputs.

        Raises:
            StylizeError: The first failing run aborts the sweep
        """
        base = manifest.output_path or default_output_path(manifest.image_path)
        reports = []
        for threshold in thresholds:
            run = RunManifest(
                image_path=manifest.image_path,
                instruction=manifest.instruction,
                mask_path=manifest.mask_path,
                output_path=sweep_output_path(base, threshold),
                overrides={**manifest.overrides, 'threshold': threshold},
            )
            reports.append(self.run(run))
        return reports


def run_stylize(manifest: RunManifest, settings: RunSettings, **kwargs) -> RunReport:
    """Run one manifest; see StylizePipeline.run."""
    return StylizePipeline(settings, **kwargs).run(manifest)


def run_batch(manifest_path: str, settings: RunSettings, **kwargs) -> BatchReport:
    """Run a JSON-lines manifest file; see StylizePipeline.run_batch."""
    return StylizePipeline(settings, **kwargs).run_batch(manifest_path)


def run_threshold_sweep(manifest: RunManifest, settings: RunSettings,
                        thresholds: Iterable[float], **kwargs) -> List[RunReport]:
    """Rerun a manifest per threshold; see StylizePipeline.run_threshold_sweep."""
    return StylizePipeline(settings, **kwargs).run_threshold_sweep(manifest, thresholds)
