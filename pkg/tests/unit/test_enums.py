"""
Unit tests for the enums read from config files, manifests and flags.
"""

import pytest

from models.enums import BackendKind, CompositeMode, ExitCode, MaskProviderKind, MaskShape, ParserKind


class TestStringEnums:
    """Tests for enums parsed from strings."""

    @pytest.mark.parametrize("enum,text,member", [
        (BackendKind, "mock", BackendKind.MOCK),
        (BackendKind, "real", BackendKind.REAL),
        (CompositeMode, "hard", CompositeMode.HARD),
        (MaskShape, "ellipse", MaskShape.ELLIPSE),
        (MaskProviderKind, "external_model", MaskProviderKind.EXTERNAL_MODEL),
        (ParserKind, "fallback", ParserKind.FALLBACK),
    ])
    def test_from_string(self, enum, text, member):
        """Test members are created from their config strings."""
        assert enum(text) == member

    def test_invalid_value_raises_error(self):
        """Test unknown strings raise ValueError."""
        with pytest.raises(ValueError):
            CompositeMode("blend")

    def test_composite_modes(self):
        """Test the three compositing modes."""
        assert [m.value for m in CompositeMode] == ["off", "soft", "hard"]


class TestExitCode:
    """Tests for ExitCode."""

    def test_values(self):
        """Test the documented process exit codes."""
        assert [int(code) for code in ExitCode] == [0, 1, 2, 3, 4, 5]

    def test_usable_as_int(self):
        """Test exit codes compare equal to plain integers."""
        assert ExitCode.IO == 2
        assert ExitCode.NUMERIC + 0 == 5
