"""
Mock implementation of the perception backend.

Images: bilinear downsample to 16x16, flatten, multiply by a seeded standard
normal matrix, normalize. Texts: each lowercase whitespace token hashes to a
seeded standard normal vector; the vectors are summed and normalized.
Both maps are deterministic per seed and smooth in the pixels.
"""

import hashlib
from typing import Sequence

import torch
import torch.nn.functional as F

from models.backend_descriptor import BackendDescriptor
from services.perception import normalize_rows, PerceptionBackend

GRID = 16
FEATURES = 3 * GRID * GRID


def token_seed(seed: int, token: str) -> int:
    """Generator seed for one token under a backend seed."""
    digest = hashlib.sha256(f"{seed}:{token}".encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


class MockPerceptionBackend(PerceptionBackend):
    """
    Deterministic stand-in for CLIP.

    Attributes:
        descriptor: dim, seed and input resolution of the mock
        projection: (768, dim) float64 matrix drawn from the descriptor seed
    """

    def __init__(self, descriptor: BackendDescriptor = None) -> None:
        """
        Initialize the mock.

        Args:
            descriptor: Backend settings; defaults to dim 512, seed 0
        """
        super().__init__(descriptor or BackendDescriptor())
        generator = torch.Generator().manual_seed(self.descriptor.seed)
        self.projection = torch.randn(
            FEATURES, self.descriptor.dim, generator=generator, dtype=torch.float64
        )

    def image_features(self, images: torch.Tensor) -> torch.Tensor:
        """Pre-normalization (N, D) image vectors."""
        small = F.interpolate(images, size=(GRID, GRID), mode='bilinear', align_corners=False)
        flat = small.reshape(images.shape[0], FEATURES)
        return flat @ self.projection.to(device=images.device, dtype=images.dtype)

    def embed_images(self, images: torch.Tensor) -> torch.Tensor:
        return normalize_rows(self.image_features(images))

    def text_features(self, text: str) -> torch.Tensor:
        """Pre-normalization (D,) text vector in float64."""
        total = torch.zeros(self.descriptor.dim, dtype=torch.float64)
        for token in text.lower().split():
            generator = torch.Generator().manual_seed(token_seed(self.descriptor.seed, token))
            total += torch.randn(self.descriptor.dim, generator=generator, dtype=torch.float64)
        return total

    def embed_texts(self, texts: Sequence[str]) -> torch.Tensor:
        return normalize_rows(torch.stack([self.text_features(text) for text in texts]))
