"""
Integration tests for the stylization pipeline.

Runs parse -> mask -> optimize -> write end to end on small images with the
mock backend, mock LLM endpoint and mock segmentation endpoint.
"""

import json
import os

import httpx
import pytest
import torch

from mocks.mock_llm_transport import MockChatServer
from mocks.mock_responses import (
    get_halves_scenario,
    SAILBOAT_CONTENT,
    SAILBOAT_INSTRUCTION,
    SAILBOAT_OBJECTS,
)
from mocks.synthetic_masks import left_half, render_shape
from models.backend_descriptor import BackendDescriptor
from models.enums import CompositeMode, ExitCode, MaskProviderKind, ParserKind
from models.errors import ConfigurationError, ImageIOError, MaskFileError, NoMatchError, StylizeError
from models.instruction import ParsedInstruction, RawInstruction
from models.run_manifest import RunManifest, RunReport
from models.style_config import EndpointConfig, RunSettings, StyleConfig
from mocks.mock_perception import MockPerceptionBackend
from services.image_io import load_image, save_image, save_mask
from services.instruction_parser import fallback_split
from services.pipeline import run_stylize, StylizePipeline


@pytest.fixture
def style():
    """A few quick steps on 32x32 images."""
    return StyleConfig(patch_size=16, n_patches=4, iterations=3, lr=5e-3)


@pytest.fixture
def image_path(tmp_path):
    """32x32 content image on disk."""
    path = str(tmp_path / "boat.png")
    save_image(get_halves_scenario(32), path)
    return path


@pytest.fixture
def mask_path(tmp_path):
    """Left-half mask on disk."""
    path = str(tmp_path / "boat_mask.png")
    save_mask(render_shape(left_half(), 32, 32), path)
    return path


@pytest.fixture
def settings(style, tmp_path):
    """Settings with the mock backend and no LLM."""
    return RunSettings(style=style, output_dir=str(tmp_path / "out"))


@pytest.fixture
def backend():
    """Shared mock backend."""
    return MockPerceptionBackend(BackendDescriptor())


def test_run_writes_png_and_report(settings, backend, image_path, mask_path, tmp_path):
    """Test a file-mask run writes the PNG and a JSON report next to it."""
    out = str(tmp_path / "result.png")
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden",
                           mask_path=mask_path, output_path=out)

    report = StylizePipeline(settings, backend=backend).run(manifest)

    assert os.path.exists(out)
    assert load_image(out).shape == (1, 3, 32, 32)
    assert report.parsed == fallback_split(RawInstruction("Make the boat golden"))
    assert report.parser_used == ParserKind.FALLBACK
    assert report.mask_provider == MaskProviderKind.FILE
    assert len(report.loss_history) == 3
    assert report.final == report.loss_history[-1]
    assert os.path.exists(str(tmp_path / "result.report.json"))


def test_report_file_round_trips(settings, backend, image_path, mask_path, tmp_path):
    """Test the report JSON reads back to an equal RunReport."""
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden",
                           mask_path=mask_path, output_path=str(tmp_path / "r.png"))
    report = StylizePipeline(settings, backend=backend).run(manifest)

    with open(report.report_path, encoding='utf-8') as f:
        loaded = RunReport.from_dict(json.load(f))

    assert loaded == report


def test_default_output_path(settings, backend, image_path, mask_path, tmp_path):
    """Test runs without --out write next to the input."""
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden", mask_path=mask_path)

    report = run_stylize(manifest, settings, backend=backend)

    assert report.output_path == str(tmp_path / "boat_stylized.png")


def test_large_image_with_own_mask(settings, backend, tmp_path):
    """Test a mask drawn for an image above image_size follows the downscaled image."""
    image_file = str(tmp_path / "large.png")
    mask_file = str(tmp_path / "large_mask.png")
    save_image(get_halves_scenario(640), image_file)
    save_mask(render_shape(left_half(), 640, 640), mask_file)
    out = str(tmp_path / "large_out.png")
    one_step = RunSettings(style=settings.style.with_overrides({'iterations': 1}),
                           output_dir=settings.output_dir)
    manifest = RunManifest(image_path=image_file, instruction="Make the boat golden",
                           mask_path=mask_file, output_path=out)

    report = StylizePipeline(one_step, backend=backend).run(manifest)

    assert report.mask_provider == MaskProviderKind.FILE
    assert load_image(out).shape == (1, 3, 512, 512)


def test_mask_of_other_size_rejected(settings, backend, image_path, tmp_path):
    """Test a mask sized for neither the stored nor the processed image fails with exit code 2."""
    mask_file = str(tmp_path / "wrong.png")
    save_mask(torch.ones(1, 1, 20, 20), mask_file)
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden", mask_path=mask_file)

    with pytest.raises(MaskFileError) as excinfo:
        StylizePipeline(settings, backend=backend).run(manifest)

    assert excinfo.value.exit_code == ExitCode.IO


def test_sailboat_instruction_with_fallback(settings, backend, image_path, mask_path):
    """Test the sailboat instruction yields its gold split through the pipeline."""
    manifest = RunManifest(image_path=image_path, instruction=SAILBOAT_INSTRUCTION, mask_path=mask_path)

    report = StylizePipeline(settings, backend=backend).run(manifest)

    assert report.parsed == ParsedInstruction(SAILBOAT_CONTENT, SAILBOAT_OBJECTS)


def test_missing_image(settings, backend, mask_path, tmp_path):
    """Test a missing image fails with the I/O exit code."""
    manifest = RunManifest(image_path=str(tmp_path / "absent.png"), instruction="Make the boat golden",
                           mask_path=mask_path)

    with pytest.raises(ImageIOError) as excinfo:
        StylizePipeline(settings, backend=backend).run(manifest)

    assert excinfo.value.exit_code == ExitCode.IO


def test_unparseable_instruction(settings, backend, image_path, mask_path):
    """Test an instruction no rule matches fails with the parse exit code."""
    manifest = RunManifest(image_path=image_path, instruction="Give the bicycle a rusty look",
                           mask_path=mask_path)

    with pytest.raises(NoMatchError) as excinfo:
        StylizePipeline(settings, backend=backend).run(manifest)

    assert excinfo.value.exit_code == ExitCode.PARSE


def test_no_mask_source(settings, backend, image_path):
    """Test a run without any mask source is a configuration error."""
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden")

    with pytest.raises(ConfigurationError, match="No mask source"):
        StylizePipeline(settings, backend=backend).run(manifest)


def test_llm_parser_used(settings, backend, image_path, mask_path):
    """Test a configured endpoint parses the instruction."""
    gold = ParsedInstruction("molten gold", "the boat")
    server = MockChatServer(gold={"Make the boat golden": gold})
    endpoint = EndpointConfig(base_url="http://llm.test/v1", model="mock", max_retries=0)
    llm_settings = RunSettings(style=settings.style, endpoint=endpoint, output_dir=settings.output_dir)
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden", mask_path=mask_path)

    report = StylizePipeline(llm_settings, backend=backend, llm_transport=server.transport()).run(manifest)

    assert report.parsed == gold
    assert report.parser_used == ParserKind.LLM


def test_llm_failure_falls_back(settings, backend, image_path, mask_path):
    """Test an endpoint error falls back to the rule-based parser."""
    server = MockChatServer(status=503)
    endpoint = EndpointConfig(base_url="http://llm.test/v1", model="mock", max_retries=0)
    llm_settings = RunSettings(style=settings.style, endpoint=endpoint, output_dir=settings.output_dir)
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden", mask_path=mask_path)

    report = StylizePipeline(llm_settings, backend=backend, llm_transport=server.transport()).run(manifest)

    assert report.parser_used == ParserKind.FALLBACK
    assert report.parsed == ParsedInstruction("golden", "the boat")


def test_mask_endpoint(settings, backend, image_path, tmp_path):
    """Test the segmentation endpoint supplies the mask."""
    texts = []

    def handler(request):
        texts.append(json.loads(request.content)['text'])
        return httpx.Response(200, json={'mask': [[3.0, -3.0], [3.0, -3.0]]})

    seg_settings = RunSettings(style=settings.style, mask_model_endpoint="http://seg.test/predict",
                               output_dir=settings.output_dir)
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden",
                           output_path=str(tmp_path / "seg.png"))

    report = StylizePipeline(seg_settings, backend=backend,
                             mask_transport=httpx.MockTransport(handler)).run(manifest)

    assert texts == ["the boat"]
    assert report.mask_provider == MaskProviderKind.EXTERNAL_MODEL


def test_synthetic_mask_setting(settings, backend, image_path, tmp_path):
    """Test the configured synthetic shape is used when nothing else is given."""
    synthetic = RunSettings(style=settings.style, mask_synthetic=left_half(), output_dir=settings.output_dir)
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden",
                           output_path=str(tmp_path / "syn.png"))

    report = StylizePipeline(synthetic, backend=backend).run(manifest)

    assert report.mask_provider == MaskProviderKind.SYNTHETIC


def test_mask_file_wins_over_model(settings, backend, image_path, mask_path, tmp_path):
    """Test an explicit mask file takes precedence over a configured model."""
    both = RunSettings(style=settings.style, mask_model_endpoint="http://seg.test/predict",
                       output_dir=settings.output_dir)
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden",
                           mask_path=mask_path, output_path=str(tmp_path / "file.png"))

    report = StylizePipeline(both, backend=backend).run(manifest)

    assert report.mask_provider == MaskProviderKind.FILE


def test_hard_composite_keeps_background(settings, backend, image_path, mask_path, tmp_path):
    """Test hard compositing leaves pixels outside the mask untouched."""
    hard = RunSettings(style=settings.style.with_overrides({'iterations': 5}),
                       composite=CompositeMode.HARD, output_dir=settings.output_dir)
    out = str(tmp_path / "hard.png")
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden",
                           mask_path=mask_path, output_path=out)

    StylizePipeline(hard, backend=backend).run(manifest)

    assert torch.equal(load_image(out)[..., 16:], load_image(image_path)[..., 16:])


def test_manifest_overrides(settings, backend, image_path, mask_path, tmp_path):
    """Test per-run overrides replace the settings' values."""
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden", mask_path=mask_path,
                           output_path=str(tmp_path / "o.png"), overrides={'iterations': 1, 'threshold': 0.4})

    report = StylizePipeline(settings, backend=backend).run(manifest)

    assert len(report.loss_history) == 1
    assert report.threshold == 0.4


def test_bad_override(settings, backend, image_path, mask_path):
    """Test unknown override keys are configuration errors."""
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden",
                           mask_path=mask_path, overrides={'lamda_d': 1.0})

    with pytest.raises(ConfigurationError, match="lamda_d"):
        StylizePipeline(settings, backend=backend).run(manifest)


def test_threshold_sweep(settings, backend, image_path, mask_path, tmp_path):
    """Test one output per threshold, named after it."""
    manifest = RunManifest(image_path=image_path, instruction="Make the boat golden",
                           mask_path=mask_path, output_path=str(tmp_path / "sweep.png"))

    reports = StylizePipeline(settings, backend=backend).run_threshold_sweep(manifest, [0.3, 0.7])

    assert [r.threshold for r in reports] == [0.3, 0.7]
    assert os.path.exists(str(tmp_path / "sweep_t0.30.png"))
    assert os.path.exists(str(tmp_path / "sweep_t0.70.png"))


def test_errors_carry_exit_codes():
    """Test every pipeline failure type is a StylizeError."""
    for error in (ConfigurationError, ImageIOError, NoMatchError):
        assert issubclass(error, StylizeError)
