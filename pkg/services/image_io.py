"""
PNG codecs for ImageBuffers and Masks, plus shape checks shared by services.

ImageBuffer: float tensor (1, 3, H, W) in [0, 1].
Mask: float tensor (1, 1, H, W) in [0, 1].
"""

import io
import logging
from typing import Tuple

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from models.errors import ImageIOError, InvalidInputError, MaskFileError
from services.data_persistence import ensure_directory

logger = logging.getLogger(__name__)

RANGE_TOLERANCE = 1e-4


def check_image(image: torch.Tensor, name: str = 'image') -> None:
    """
    Validate an ImageBuffer (or a batch of them).

    Raises:
        InvalidInputError: Wrong shape, non-finite or out-of-range values
    """
    if not isinstance(image, torch.Tensor) or image.dim() != 4 or image.shape[1] != 3:
        shape = tuple(image.shape) if isinstance(image, torch.Tensor) else type(image).__name__
        raise InvalidInputError(f"{name} must be a (N, 3, H, W) tensor, got {shape}")
    if not torch.isfinite(image).all():
        raise InvalidInputError(f"{name} contains non-finite values")
    if image.min() < -RANGE_TOLERANCE or image.max() > 1 + RANGE_TOLERANCE:
        raise InvalidInputError(f"{name} values outside [0, 1]")


def check_mask(mask: torch.Tensor, image: torch.Tensor = None) -> None:
    """
    Validate a Mask, optionally against its paired image.

    Raises:
        InvalidInputError: Wrong shape, non-finite or out-of-range values
    """
    if not isinstance(mask, torch.Tensor) or mask.dim() != 4 or mask.shape[:2] != (1, 1):
        shape = tuple(mask.shape) if isinstance(mask, torch.Tensor) else type(mask).__name__
        raise InvalidInputError(f"mask must be a (1, 1, H, W) tensor, got {shape}")
    if not torch.isfinite(mask).all():
        raise InvalidInputError("mask contains non-finite values")
    if mask.min() < 0 or mask.max() > 1:
        raise InvalidInputError("mask values outside [0, 1]")
    if image is not None and mask.shape[-2:] != image.shape[-2:]:
        raise InvalidInputError(
            f"mask size {tuple(mask.shape[-2:])} differs from image size {tuple(image.shape[-2:])}"
        )


def check_same_size(first: torch.Tensor, second: torch.Tensor, what: str) -> None:
    """Raise InvalidInputError unless both tensors have identical shape."""
    if first.shape != second.shape:
        raise InvalidInputError(
            f"{what}: shape mismatch {tuple(first.shape)} vs {tuple(second.shape)}"
        )


def load_image(path: str, max_side: int = None) -> torch.Tensor:
    """
    Read an image file as an RGB ImageBuffer.

    Args:
        path: Image file path
        max_side: If given, images with a longer side above it are downscaled

    Returns:
        Tensor (1, 3, H, W) in [0, 1]

    Raises:
        ImageIOError: If the file cannot be read
    """
    try:
        with Image.open(path) as img:
            rgb = img.convert('RGB')
            if max_side and max(rgb.size) > max_side:
                scale = max_side / max(rgb.size)
                size = (max(1, round(rgb.width * scale)), max(1, round(rgb.height * scale)))
                logger.info("Resizing %s from %s to %s", path, rgb.size, size)
                rgb = rgb.resize(size, resample=Image.Resampling.LANCZOS)
            array = np.asarray(rgb, dtype=np.float32) / 255.0
    except (OSError, ValueError) as exc:
        raise ImageIOError(f"Cannot read image {path}: {exc}") from exc
    return torch.from_numpy(array.copy()).permute(2, 0, 1).unsqueeze(0)


def read_image_size(path: str) -> Tuple[int, int]:
    """
    (height, width) of an image file, read from its header.

    Raises:
        ImageIOError: If the file cannot be read
    """
    try:
        with Image.open(path) as img:
            return img.height, img.width
    except (OSError, ValueError) as exc:
        raise ImageIOError(f"Cannot read image {path}: {exc}") from exc


def save_image(image: torch.Tensor, path: str) -> None:
    """
    Write an ImageBuffer as 8-bit RGB PNG.

    Raises:
        ImageIOError: If the file cannot be written
    """
    try:
        ensure_directory(path)
        Image.fromarray(_to_rgb_pixels(image)).save(path, format='PNG')
    except (OSError, ValueError) as exc:
        raise ImageIOError(f"Cannot write image {path}: {exc}") from exc


def encode_png(image: torch.Tensor) -> bytes:
    """ImageBuffer as in-memory 8-bit RGB PNG bytes."""
    buffer = io.BytesIO()
    Image.fromarray(_to_rgb_pixels(image)).save(buffer, format='PNG')
    return buffer.getvalue()


def _to_rgb_pixels(image: torch.Tensor) -> np.ndarray:
    array = image.detach().squeeze(0).clamp(0, 1).permute(1, 2, 0).cpu().double().numpy()
    return np.round(array * 255.0).astype(np.uint8)


def save_mask(mask: torch.Tensor, path: str) -> None:
    """
    Write a Mask as 8-bit grayscale PNG (255 = target).

    Raises:
        MaskFileError: If the file cannot be written
    """
    check_mask(mask)
    array = mask.detach()[0, 0].cpu().numpy()
    pixels = np.round(array * 255.0).astype(np.uint8)
    try:
        ensure_directory(path)
        Image.fromarray(pixels).save(path, format='PNG')
    except (OSError, ValueError) as exc:
        raise MaskFileError(f"Cannot write mask {path}: {exc}") from exc


def load_mask(path: str) -> torch.Tensor:
    """
    Read a grayscale PNG as a Mask; color files are converted to luminance.

    Raises:
        MaskFileError: If the file is missing or unreadable
    """
    try:
        with Image.open(path) as img:
            array = np.asarray(img.convert('L'), dtype=np.float32) / 255.0
    except (OSError, ValueError) as exc:
        raise MaskFileError(f"Cannot read mask {path}: {exc}") from exc
    return torch.from_numpy(array.copy()).unsqueeze(0).unsqueeze(0)


def resize_bilinear(tensor: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Bilinear resize of an (N, C, H, W) tensor; identity when sizes match."""
    if tensor.shape[-2:] == (height, width):
        return tensor
    return F.interpolate(tensor, size=(height, width), mode='bilinear', align_corners=False)
