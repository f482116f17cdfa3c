"""
Perception service: unit-norm text and image embeddings from a pluggable
backend, and the random perspective augmentation used on loss patches.

Backends are immutable after load and safe to share between jobs; every
random draw takes a caller-owned torch.Generator.
"""

import logging
import threading
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F
from kornia.geometry.transform import get_perspective_transform, warp_perspective

from models.backend_descriptor import BackendDescriptor
from models.enums import BackendKind
from models.errors import BackendError, InvalidInputError
from services.image_io import check_image, resize_bilinear

logger = logging.getLogger(__name__)

ZERO_NORM = 1e-12
MIN_PATCH_SIDE = 8

# Photo templates used when text embeddings are averaged over prompts.
TEXT_TEMPLATES = (
    'a photo of {}.',
    'a bad photo of a {}.',
    'a good photo of a {}.',
    'a rendering of a {}.',
    'a cropped photo of the {}.',
    'a close-up photo of a {}.',
    'a bright photo of a {}.',
    'a painting of a {}.',
    'art of the {}.',
    'a photo of the large {}.',
)

CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)


def normalize_rows(vectors: torch.Tensor) -> torch.Tensor:
    """
    L2-normalize each row; rows with (near) zero norm become e1.
    """
    norms = vectors.norm(dim=-1, keepdim=True)
    unit = vectors / norms.clamp_min(ZERO_NORM)
    basis = torch.zeros_like(vectors)
    basis[..., 0] = 1.0
    return torch.where(norms < ZERO_NORM, basis, unit)


class PerceptionBackend(ABC):
    """
    Text and image encoders sharing one embedding space.

    Subclasses return unit-norm rows; callers go through encode_text and
    encode_image, which validate inputs.
    """

    def __init__(self, descriptor: BackendDescriptor) -> None:
        self.descriptor = descriptor

    @property
    def dim(self) -> int:
        """Embedding dimension."""
        return self.descriptor.dim

    @property
    def input_resolution(self) -> int:
        """Square side the image encoder consumes."""
        return self.descriptor.input_resolution

    @property
    def perceptual(self) -> Optional[nn.Module]:
        """Feature extractor for the content loss; None means pixel mode."""
        return None

    @abstractmethod
    def embed_images(self, images: torch.Tensor) -> torch.Tensor:
        """(N, 3, H, W) in [0, 1] -> (N, D) unit rows, differentiable."""

    @abstractmethod
    def embed_texts(self, texts: Sequence[str]) -> torch.Tensor:
        """N strings -> (N, D) unit rows."""


class ClipPerceptionBackend(PerceptionBackend):
    """
    Adapter for a CLIP-compatible checkpoint loaded through the `clip` package.

    The package is imported on first use so the mock path never needs it.
    """

    def __init__(self, descriptor: BackendDescriptor, device: str = 'cpu') -> None:
        super().__init__(descriptor)
        self.device = device
        try:
            import clip  # pylint: disable=import-outside-toplevel
        except ImportError as exc:
            raise BackendError(
                "The real backend needs the 'clip' package "
                "(pip install git+https://github.com/openai/CLIP.git)"
            ) from exc

        try:
            model, _ = clip.load(descriptor.weights_path, device=device, jit=False)
        except (RuntimeError, OSError) as exc:
            raise BackendError(f"Cannot load CLIP weights {descriptor.weights_path}: {exc}") from exc

        self._clip = clip
        self._model = model.eval().float()
        for param in self._model.parameters():
            param.requires_grad_(False)

        width = self._model.text_projection.shape[1]
        if width != descriptor.dim:
            raise BackendError(
                f"Checkpoint embeds into {width} dimensions, descriptor says {descriptor.dim}"
            )
        self._resolution = int(self._model.visual.input_resolution)
        self._mean = torch.tensor(CLIP_MEAN, device=device).view(1, 3, 1, 1)
        self._std = torch.tensor(CLIP_STD, device=device).view(1, 3, 1, 1)
        self._perceptual = None
        self._perceptual_lock = threading.Lock()
        logger.info("Loaded CLIP backend from %s (dim %d, input %d)",
                    descriptor.weights_path, width, self._resolution)

    @property
    def input_resolution(self) -> int:
        return self._resolution

    @property
    def perceptual(self) -> Optional[nn.Module]:
        with self._perceptual_lock:
            if self._perceptual is None:
                # Imported here to avoid a cycle: losses depends on this module.
                from services.losses import VggFeatures  # pylint: disable=import-outside-toplevel
                self._perceptual = VggFeatures().to(self.device)
        return self._perceptual

    def embed_images(self, images: torch.Tensor) -> torch.Tensor:
        dtype = images.dtype
        x = resize_bilinear(images.to(self.device, torch.float32), self._resolution, self._resolution)
        x = (x - self._mean) / self._std
        features = self._model.encode_image(x).float()
        return normalize_rows(features).to(dtype)

    def embed_texts(self, texts: Sequence[str]) -> torch.Tensor:
        tokens = self._clip.tokenize(list(texts), truncate=True).to(self.device)
        with torch.no_grad():
            features = self._model.encode_text(tokens).float()
        return normalize_rows(features)


def load_backend(descriptor: BackendDescriptor) -> PerceptionBackend:
    """
    Build the backend a descriptor names.

    Raises:
        BackendError: If the real backend cannot be loaded
    """
    if descriptor.kind == BackendKind.MOCK:
        # Local import keeps services importable without the mocks package.
        from mocks.mock_perception import MockPerceptionBackend  # pylint: disable=import-outside-toplevel
        return MockPerceptionBackend(descriptor)
    return ClipPerceptionBackend(descriptor)


def encode_text(
    backend: PerceptionBackend,
    text: str,
    dtype: torch.dtype = torch.float32
) -> torch.Tensor:
    """
    Embed one text.

    Returns:
        (1, D) unit-norm row

    Raises:
        InvalidInputError: If the text is empty
    """
    if not isinstance(text, str) or not text.strip():
        raise InvalidInputError("Cannot encode empty text")
    return backend.embed_texts([text]).to(dtype)


def encode_text_with_templates(
    backend: PerceptionBackend,
    text: str,
    templates: Sequence[str] = TEXT_TEMPLATES,
    dtype: torch.dtype = torch.float32
) -> torch.Tensor:
    """Re-normalized mean of the text's embeddings across prompt templates."""
    if not isinstance(text, str) or not text.strip():
        raise InvalidInputError("Cannot encode empty text")
    embeddings = backend.embed_texts([template.format(text) for template in templates])
    return normalize_rows(embeddings.mean(dim=0, keepdim=True)).to(dtype)


def encode_image(backend: PerceptionBackend, image: torch.Tensor) -> torch.Tensor:
    """
    Embed an image (or a batch of patches).

    Returns:
        (N, D) unit-norm rows, differentiable w.r.t. the image

    Raises:
        InvalidInputError: Wrong shape, NaN or out-of-range pixels
    """
    check_image(image)
    return backend.embed_images(image)


def augment_patch(
    patch: torch.Tensor,
    strength: float,
    rng: torch.Generator,
    resolution: int
) -> torch.Tensor:
    """
    Random perspective warp followed by a resize to the encoder resolution.

    Each corner moves by at most strength * side / 2 along each axis; pixels
    warped in from outside the patch are zero. The corner offsets are drawn
    even at strength 0 so the generator advances identically for any strength.

    Args:
        patch: (N, 3, h, w) patches, h and w >= 8
        strength: Warp strength in [0, 1]
        rng: Generator consumed by the corner draw
        resolution: Output side

    Returns:
        (N, 3, resolution, resolution), differentiable w.r.t. the patch

    Raises:
        InvalidInputError: If the patch is smaller than 8x8 or strength is out of range
    """
    if patch.dim() != 4 or patch.shape[-1] < MIN_PATCH_SIDE or patch.shape[-2] < MIN_PATCH_SIDE:
        raise InvalidInputError(f"Patch must be at least 8x8, got {tuple(patch.shape)}")
    if not 0.0 <= strength <= 1.0:
        raise InvalidInputError(f"Augmentation strength {strength} outside [0, 1]")

    n, _, h, w = patch.shape
    unit = torch.rand(n, 4, 2, generator=rng, dtype=patch.dtype, device=patch.device)

    if strength > 0:
        corners = patch_corners(h, w, n, patch.dtype, patch.device)
        reach = torch.tensor([w, h], dtype=patch.dtype, device=patch.device) * (strength / 2.0)
        displaced = corners + (unit * 2.0 - 1.0) * reach
        transform = get_perspective_transform(corners, displaced)
        patch = warp_perspective(
            patch, transform, dsize=(h, w), mode='bilinear',
            padding_mode='zeros', align_corners=True,
        )

    return resize_bilinear(patch, resolution, resolution)


def patch_corners(
    height: int,
    width: int,
    count: int = 1,
    dtype: torch.dtype = torch.float32,
    device=None
) -> torch.Tensor:
    """Pixel-space corners (x, y), clockwise from top-left, shape (count, 4, 2)."""
    corners = torch.tensor(
        [[0.0, 0.0], [width - 1.0, 0.0], [width - 1.0, height - 1.0], [0.0, height - 1.0]],
        dtype=dtype, device=device,
    )
    return corners.unsqueeze(0).expand(count, 4, 2).clone()
