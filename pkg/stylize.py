"""
stylize - text-guided localized style transfer from the command line.

    stylize --image PATH --text "INSTRUCTION" [--mask PATH] [--out PATH] ...
    stylize --manifest runs.jsonl [--jobs N]
    stylize --evaluate-corpus data/gold_corpus.jsonl [--judge]

Exit codes: 0 ok, 1 configuration, 2 I/O, 3 parse, 4 backend, 5 numeric.
"""

import argparse
import functools
import logging
import sys
from typing import List, Optional

from models.enums import BackendKind, CompositeMode, ExitCode
from models.errors import ConfigurationError, StylizeError
from models.run_manifest import RunManifest
from models.style_config import RunSettings
from presenters.report_presenter import ReportPresenter
from services.config_loader import load_config
from services.data_persistence import atomic_write_json
from services.instruction_parser import (
    evaluate_corpus,
    fallback_split,
    judge_split,
    load_gold_corpus,
    make_llm_parser,
)
from services.pipeline import StylizePipeline

logger = logging.getLogger('stylize')

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the configuration code, not argparse's 2."""

    def error(self, message: str):
        raise ConfigurationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    """Command-line interface."""
    parser = _ArgumentParser(
        prog='stylize',
        description="Stylize the object an instruction names, leaving the rest of the image unchanged.",
    )
    parser.add_argument('--image', help="content image")
    parser.add_argument('--text', help='instruction, e.g. "Change the boat into art on fire"')
    parser.add_argument('--mask', help="grayscale PNG mask of the target (255 = target)")
    parser.add_argument('--out', help="output PNG (or eval report JSON with --evaluate-corpus)")
    parser.add_argument('--threshold', type=float, help="stylization threshold t (default 0.7)")
    parser.add_argument('--iterations', type=int, help="optimization steps")
    parser.add_argument('--seed', type=int, help="seed for init and patch sampling")
    parser.add_argument('--backend', choices=[k.value for k in BackendKind], help="perception backend")
    parser.add_argument('--weights', help="CLIP checkpoint for the real backend")
    parser.add_argument('--llm-endpoint', help="OpenAI-compatible base URL for instruction parsing")
    parser.add_argument('--llm-model', help="model name sent to the LLM endpoint")
    parser.add_argument('--composite', choices=[m.value for m in CompositeMode],
                        help="blend the output with the content through the mask")
    parser.add_argument('--config', help="JSON config file")
    parser.add_argument('--jobs', type=int, help="parallel batch entries")
    parser.add_argument('--manifest', help="JSON-lines file of runs")
    parser.add_argument('--sweep', help="comma-separated thresholds, e.g. 0.3,0.5,0.7,0.9")
    parser.add_argument('--evaluate-corpus', metavar='PATH', help="score the instruction parser on a gold corpus")
    parser.add_argument('--judge', action='store_true', help="also ask the LLM to grade each split")
    parser.add_argument('--verbose', '-v', action='store_true', help="debug logging")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {
        'threshold': args.threshold,
        'iterations': args.iterations,
        'seed': args.seed,
        'backend': args.backend,
        'weights_path': args.weights,
        'llm_endpoint': args.llm_endpoint,
        'llm_model': args.llm_model,
        'composite': args.composite,
        'jobs': args.jobs,
    }


def _parse_thresholds(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"--sweep expects comma-separated numbers, got {text!r}") from exc
    if not values:
        raise ConfigurationError("--sweep needs at least one threshold")
    return values


def _evaluate(args: argparse.Namespace, settings: RunSettings, presenter: ReportPresenter) -> int:
    corpus = load_gold_corpus(args.evaluate_corpus)
    endpoint = settings.endpoint
    parser = make_llm_parser(endpoint) if endpoint else fallback_split

    judge = None
    if args.judge:
        if endpoint is None:
            raise ConfigurationError("--judge needs an LLM endpoint (--llm-endpoint and --llm-model)")
        judge = functools.partial(judge_split, endpoint)

    report = evaluate_corpus(corpus, parser, judge=judge)
    print(presenter.format_eval_report(report))
    if args.out:
        atomic_write_json(args.out, report.to_dict())
    return ExitCode.OK


def run(args: argparse.Namespace) -> int:
    """Dispatch parsed arguments; raises StylizeError on failure."""
    settings = load_config(args.config, _overrides(args))
    presenter = ReportPresenter()

    if args.evaluate_corpus:
        return _evaluate(args, settings, presenter)

    pipeline = StylizePipeline(settings, presenter=presenter)
    if args.manifest:
        batch = pipeline.run_batch(args.manifest)
        print(presenter.format_batch_summary(batch))
        return ExitCode.OK

    if not args.image or not args.text:
        raise ConfigurationError("--image and --text are required (or use --manifest / --evaluate-corpus)")

    manifest = RunManifest(image_path=args.image, instruction=args.text,
                           mask_path=args.mask, output_path=args.out)

    if args.sweep:
        for report in pipeline.run_threshold_sweep(manifest, _parse_thresholds(args.sweep)):
            print(presenter.format_run_summary(report))
        return ExitCode.OK

    print(presenter.format_run_summary(pipeline.run(manifest)))
    return ExitCode.OK


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point.

    Returns:
        Process exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except StylizeError as exc:
        print(str(exc), file=sys.stderr)
        return int(exc.exit_code)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    try:
        return int(run(args))
    except StylizeError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return int(exc.exit_code)


if __name__ == '__main__':
    sys.exit(main())
