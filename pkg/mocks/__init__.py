"""Mocks package initialization."""

from mocks.mock_responses import SCENARIOS
from mocks.mock_perception import MockPerceptionBackend
from mocks.synthetic_masks import SyntheticMaskSource

__all__ = ['SCENARIOS', 'MockPerceptionBackend', 'SyntheticMaskSource']
