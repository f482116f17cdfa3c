"""
Shared fixtures: the mock perception backend and small, fast style configs.
"""

import pytest

from mocks.mock_perception import MockPerceptionBackend
from models.backend_descriptor import BackendDescriptor
from models.style_config import StyleConfig


@pytest.fixture
def backend():
    """Mock backend with the default descriptor (dim 512, seed 0)."""
    return MockPerceptionBackend(BackendDescriptor())


@pytest.fixture
def fast_cfg():
    """StyleConfig sized for 32x32 to 64x64 test images."""
    return StyleConfig(patch_size=16, n_patches=4, iterations=5, lr=5e-3)
