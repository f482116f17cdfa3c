"""
Unit tests for JSON persistence helpers and the PNG codecs.
"""

import os

import pytest
import torch

from mocks.mock_responses import get_gradient_scenario
from models.errors import ImageIOError, MaskFileError
from services.data_persistence import atomic_write_json, iter_jsonl, read_jsonl, safe_read_json
from services.image_io import encode_png, load_image, load_mask, save_image, save_mask


class TestJsonFiles:
    """Tests for JSON and JSON-lines helpers."""

    def test_atomic_write_and_read(self, tmp_path):
        """Test written JSON reads back and no temp file remains."""
        path = str(tmp_path / "nested" / "report.json")

        assert atomic_write_json(path, {'total': 1.5, 'items': [1, 2]})

        assert safe_read_json(path) == {'total': 1.5, 'items': [1, 2]}
        assert not os.path.exists(path + ".tmp")

    def test_safe_read_default(self, tmp_path):
        """Test missing and invalid files give the default."""
        broken = tmp_path / "broken.json"
        broken.write_text("{")

        assert safe_read_json(str(tmp_path / "absent.json"), default={}) == {}
        assert safe_read_json(str(broken), default=[]) == []

    def test_read_jsonl_skips_blank_lines(self, tmp_path):
        """Test blank lines are ignored."""
        path = tmp_path / "runs.jsonl"
        path.write_text('{"a": 1}\n\n{"a": 2}\n')

        assert read_jsonl(str(path)) == [{'a': 1}, {'a': 2}]

    def test_read_jsonl_rejects_non_objects(self, tmp_path):
        """Test lines must hold objects."""
        path = tmp_path / "runs.jsonl"
        path.write_text('[1, 2]\n')

        with pytest.raises(ValueError, match=":1"):
            read_jsonl(str(path))

    def test_iter_jsonl_reports_bad_lines_in_place(self, tmp_path):
        """Test bad lines come back as errors between the good records."""
        path = tmp_path / "runs.jsonl"
        path.write_text('{"a": 1}\n{oops\n\n"text"\n{"a": 2}\n')

        items = list(iter_jsonl(str(path)))

        assert [number for number, _ in items] == [1, 2, 4, 5]
        assert items[0][1] == {'a': 1}
        assert isinstance(items[1][1], ValueError) and ":2: invalid JSON" in str(items[1][1])
        assert isinstance(items[2][1], ValueError) and ":4: expected a JSON object" in str(items[2][1])
        assert items[3][1] == {'a': 2}

    def test_read_jsonl_stops_at_first_bad_line(self, tmp_path):
        """Test the strict reader raises for the first bad line."""
        path = tmp_path / "runs.jsonl"
        path.write_text('{"a": 1}\n{oops\n[1]\n')

        with pytest.raises(ValueError, match=":2: invalid JSON"):
            read_jsonl(str(path))


class TestImageCodecs:
    """Tests for image and mask files."""

    def test_image_round_trip(self, tmp_path):
        """Test an image survives PNG within 8-bit quantization."""
        image = get_gradient_scenario(16)
        path = str(tmp_path / "image.png")

        save_image(image, path)
        loaded = load_image(path)

        assert loaded.shape == (1, 3, 16, 16)
        assert (loaded - image).abs().max() <= 0.5 / 255 + 1e-6

    def test_load_downscales(self, tmp_path):
        """Test images above max_side are shrunk."""
        path = str(tmp_path / "image.png")
        save_image(torch.zeros(1, 3, 40, 80), path)

        assert load_image(path, max_side=40).shape == (1, 3, 20, 40)

    def test_missing_image(self, tmp_path):
        """Test unreadable images raise ImageIOError."""
        with pytest.raises(ImageIOError):
            load_image(str(tmp_path / "absent.png"))

    def test_not_an_image(self, tmp_path):
        """Test non-image files raise ImageIOError."""
        path = tmp_path / "fake.png"
        path.write_text("hello")

        with pytest.raises(ImageIOError):
            load_image(str(path))

    def test_mask_round_trip(self, tmp_path):
        """Test a mask reads back within 1/255."""
        mask = torch.linspace(0, 1, 64).view(1, 1, 8, 8)
        path = str(tmp_path / "mask.png")

        save_mask(mask, path)

        assert torch.allclose(load_mask(path), mask, atol=1 / 255)

    def test_missing_mask(self, tmp_path):
        """Test unreadable masks raise MaskFileError."""
        with pytest.raises(MaskFileError):
            load_mask(str(tmp_path / "absent.png"))

    def test_encode_png_signature(self):
        """Test in-memory encoding produces PNG bytes."""
        assert encode_png(get_gradient_scenario(8)).startswith(b'\x89PNG')
