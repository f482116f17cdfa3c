"""
Segmentation service: the target-object Mask for (image, stylized objects).

Sources:
- FileMaskSource: grayscale PNG, 255 = target
- ExternalModelMaskSource: a referring-segmentation model behind a callable,
  loaded from a TorchScript checkpoint or reached over HTTP
- SyntheticMaskSource (mocks.synthetic_masks): rectangles and ellipses

Masks stay soft in [0, 1]; binarize gives hard masks on request.
"""

import base64
import logging
from abc import ABC, abstractmethod
from typing import Any, Callable, Optional, Tuple, Union

import httpx
import torch

from models.enums import MaskProviderKind
from models.errors import InvalidInputError, MaskFileError, ProviderError, StylizeError
from models.mask_provider import MaskProviderSpec
from services.image_io import check_image, check_mask, encode_png, load_mask, resize_bilinear

logger = logging.getLogger(__name__)

Box = Tuple[int, int, int, int]
Predictor = Callable[[torch.Tensor, str], Any]

OUTPUT_MODES = ('auto', 'logits', 'probabilities')


class MaskSource(ABC):
    """A configured mask provider."""
    kind: MaskProviderKind

    @abstractmethod
    def produce(self, image: torch.Tensor, object_text: str) -> torch.Tensor:
        """(1, 1, H, W) mask for the image; may raise ProviderError."""


class FileMaskSource(MaskSource):
    """
    Reads a mask PNG that must match the image size.

    When the image was downscaled after loading, source_size is its size on
    disk; a mask of that size is resized to the processed image.
    """
    kind = MaskProviderKind.FILE

    def __init__(self, path: str, source_size: Optional[Tuple[int, int]] = None) -> None:
        self.path = path
        self.source_size = tuple(source_size) if source_size else None

    def produce(self, image: torch.Tensor, object_text: str) -> torch.Tensor:
        mask = load_mask(self.path).to(image.dtype)
        mask_size = tuple(mask.shape[-2:])
        image_size = tuple(image.shape[-2:])
        if mask_size == image_size:
            return mask
        if self.source_size is not None and mask_size == self.source_size:
            logger.debug("Resizing mask %s from %s to %s", self.path, mask_size, image_size)
            return resize_bilinear(mask, *image_size).clamp(0.0, 1.0)
        raise MaskFileError(
            f"Mask {self.path} is {mask_size}, image is {self.source_size or image_size}"
        )


class ExternalModelMaskSource(MaskSource):
    """
    Adapter around a referring-segmentation model.

    The predictor receives the ImageBuffer and the object text and returns an
    (h, w) map in any resolution. Logits are passed through a sigmoid; in
    'auto' mode a map is treated as logits when any value lies outside [0, 1].
    The map is then resized bilinearly to the image and clamped.
    """
    kind = MaskProviderKind.EXTERNAL_MODEL

    def __init__(self, predictor: Predictor, output: str = 'auto', name: str = 'model') -> None:
        if output not in OUTPUT_MODES:
            raise InvalidInputError(f"Unknown model output mode {output!r}")
        self.predictor = predictor
        self.output = output
        self.name = name

    @classmethod
    def from_checkpoint(cls, path: str, output: str = 'auto') -> 'ExternalModelMaskSource':
        """
        Load a TorchScript module called as module(image, text).

        Raises:
            ProviderError: If the checkpoint cannot be loaded
        """
        try:
            module = torch.jit.load(path, map_location='cpu')
        except (RuntimeError, OSError, ValueError) as exc:
            raise ProviderError(f"Cannot load segmentation checkpoint {path}: {exc}") from exc
        module.eval()

        def predict(image: torch.Tensor, text: str) -> torch.Tensor:
            with torch.no_grad():
                return module(image, text)

        return cls(predict, output=output, name=path)

    @classmethod
    def from_endpoint(
        cls,
        url: str,
        output: str = 'auto',
        timeout: float = 60.0,
        transport: Optional[httpx.BaseTransport] = None
    ) -> 'ExternalModelMaskSource':
        """
        Reach a model served over HTTP.

        Request: POST {"text": ..., "image_png_base64": ...}
        Response: {"mask": [[...], ...]}
        """
        def predict(image: torch.Tensor, text: str) -> Any:
            payload = {
                'text': text,
                'image_png_base64': base64.b64encode(encode_png(image)).decode('ascii'),
            }
            try:
                with httpx.Client(timeout=timeout, transport=transport) as client:
                    response = client.post(url, json=payload)
            except httpx.HTTPError as exc:
                raise ProviderError(f"Segmentation endpoint {url} unreachable: {exc}") from exc
            if not response.is_success:
                raise ProviderError(
                    f"Segmentation endpoint returned status {response.status_code}: "
                    f"{response.text[:200]}"
                )
            try:
                return response.json()['mask']
            except (ValueError, KeyError, TypeError) as exc:
                raise ProviderError("Segmentation endpoint response lacks 'mask'") from exc

        return cls(predict, output=output, name=url)

    def produce(self, image: torch.Tensor, object_text: str) -> torch.Tensor:
        try:
            raw = self.predictor(image, object_text)
        except StylizeError:
            raise
        except Exception as exc:  # pylint: disable=broad-except
            raise ProviderError(f"Segmentation model {self.name} failed: {exc}") from exc
        return self.postprocess(raw, image.shape[-2], image.shape[-1], image.dtype)

    def postprocess(self, raw: Any, height: int, width: int, dtype=torch.float32) -> torch.Tensor:
        """Model output -> clamped (1, 1, height, width) probabilities."""
        try:
            scores = torch.as_tensor(raw).to(torch.float64)
        except (TypeError, ValueError, RuntimeError) as exc:
            raise ProviderError(f"Segmentation model {self.name} returned a non-numeric map") from exc
        while scores.dim() > 2 and scores.shape[0] == 1:
            scores = scores[0]
        if scores.dim() != 2 or scores.numel() == 0:
            raise ProviderError(
                f"Segmentation model {self.name} returned shape {tuple(scores.shape)}, expected (h, w)"
            )
        if not torch.isfinite(scores).all():
            raise ProviderError(f"Segmentation model {self.name} returned non-finite values")

        is_logits = self.output == 'logits' or (
            self.output == 'auto' and (scores.min() < 0 or scores.max() > 1)
        )
        if is_logits:
            scores = torch.sigmoid(scores)
        resized = resize_bilinear(scores[None, None], height, width)
        return resized.clamp(0.0, 1.0).to(dtype)


def build_mask_source(
    spec: MaskProviderSpec,
    transport: Optional[httpx.BaseTransport] = None
) -> MaskSource:
    """Instantiate the source a provider spec describes."""
    if spec.kind == MaskProviderKind.FILE:
        return FileMaskSource(spec.file_path)
    if spec.kind == MaskProviderKind.SYNTHETIC:
        from mocks.synthetic_masks import SyntheticMaskSource  # pylint: disable=import-outside-toplevel
        return SyntheticMaskSource(spec.synthetic)
    if spec.model_checkpoint:
        return ExternalModelMaskSource.from_checkpoint(spec.model_checkpoint)
    return ExternalModelMaskSource.from_endpoint(spec.model_endpoint, transport=transport)


def get_mask(
    image: torch.Tensor,
    object_text: str,
    provider: Union[MaskProviderSpec, MaskSource]
) -> torch.Tensor:
    """
    Mask of the object in the image.

    Returns:
        (1, 1, H, W) tensor in [0, 1] matching the image

    Raises:
        InvalidInputError: Invalid image, or empty object text for a model
        MaskFileError: Missing or mis-sized mask file
        ProviderError: Model failure or malformed provider output
    """
    check_image(image)
    source = build_mask_source(provider) if isinstance(provider, MaskProviderSpec) else provider
    if source.kind == MaskProviderKind.EXTERNAL_MODEL and not (object_text or '').strip():
        raise InvalidInputError("A segmentation model needs a non-empty object text")

    mask = source.produce(image, object_text)
    try:
        check_mask(mask, image)
    except InvalidInputError as exc:
        raise ProviderError(f"{source.kind.value} mask source produced an invalid mask: {exc}") from exc
    logger.debug("Mask from %s covers %.1f%% of the image", source.kind.value, 100 * mask.mean().item())
    return mask


def threshold_mask(mask: torch.Tensor, threshold: float) -> torch.Tensor:
    """1 where mask >= threshold, else 0; no range check on threshold."""
    return (mask >= threshold).to(mask.dtype)


def binarize(mask: torch.Tensor, threshold: float) -> torch.Tensor:
    """
    Hard mask: 1 iff value >= threshold.

    Raises:
        InvalidInputError: If threshold is not in (0, 1) or the mask is invalid
    """
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"Binarize threshold {threshold} outside (0, 1)")
    check_mask(mask)
    return threshold_mask(mask, threshold)


def check_box(mask: torch.Tensor, box: Box) -> None:
    """Raise InvalidInputError unless the (x, y, w, h) box lies inside the mask."""
    x, y, w, h = box
    height, width = mask.shape[-2:]
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > width or y + h > height:
        raise InvalidInputError(f"Box {tuple(box)} outside mask of size {width}x{height}")


def patch_mask_mean(mask: torch.Tensor, box: Box) -> float:
    """
    Mean mask value inside an (x, y, w, h) box.

    Raises:
        InvalidInputError: If the box is not inside the mask
    """
    check_box(mask, box)
    x, y, w, h = box
    return mask[..., y:y + h, x:x + w].mean().item()
