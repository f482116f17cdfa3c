"""
Loss service: the terms of the localized stylization objective and their
weighted total.

    total = lambda_d * dir + lambda_p * patch + lambda_c * content
            + lambda_tv * tv + mask_weight * mask

mask_weight is threshold * lambda_m, or lambda_m alone when
weight_mask_by_threshold is off. Every term is differentiable w.r.t. the
stylized image; randomness comes only from the caller's generator.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from models.errors import BackendError, InvalidInputError
from models.instruction import ParsedInstruction
from models.loss_breakdown import LossBreakdown
from models.style_config import StyleConfig
from services.image_io import check_image, check_mask, check_same_size, resize_bilinear
from services.perception import (
    augment_patch,
    encode_image,
    encode_text,
    encode_text_with_templates,
    PerceptionBackend,
)
from services.segmentation import Box, patch_mask_mean, threshold_mask

logger = logging.getLogger(__name__)

DEGENERATE_SQUARED_NORM = 1e-12
CONTENT_POOL = 4
TERMS = ('dir', 'patch', 'content', 'tv', 'mask')


def _check_finite(*tensors: torch.Tensor) -> None:
    for tensor in tensors:
        if not torch.isfinite(tensor).all():
            raise InvalidInputError("Directional loss inputs must be finite")


def directional_loss_rows(delta_image: torch.Tensor, delta_text: torch.Tensor) -> torch.Tensor:
    """
    1 - cos(delta_image, delta_text) per row; rows where either change has
    norm below 1e-6 give 1.

    Args:
        delta_image: (N, D)
        delta_text: (1, D) or (N, D)

    Returns:
        (N,) losses in [0, 2]
    """
    dot = (delta_image * delta_text).sum(dim=-1)
    sq_image = delta_image.pow(2).sum(dim=-1)
    sq_text = delta_text.pow(2).sum(dim=-1).expand_as(sq_image)
    degenerate = (sq_image < DEGENERATE_SQUARED_NORM) | (sq_text < DEGENERATE_SQUARED_NORM)
    denom = (sq_image.clamp_min(DEGENERATE_SQUARED_NORM) * sq_text.clamp_min(DEGENERATE_SQUARED_NORM)).sqrt()
    cos = torch.where(degenerate, torch.zeros_like(dot), dot / denom)
    return (1.0 - cos).clamp(0.0, 2.0)


def directional_loss(
    e_out: torch.Tensor,
    e_src_img: torch.Tensor,
    e_sty_txt: torch.Tensor,
    e_src_txt: torch.Tensor
) -> torch.Tensor:
    """
    Directional loss between the image change and the text change.

    Returns:
        Scalar tensor in [0, 2]; the mean over rows when batches are given

    Raises:
        InvalidInputError: If any embedding has non-finite values
    """
    _check_finite(e_out, e_src_img, e_sty_txt, e_src_txt)
    rows = directional_loss_rows(
        (e_out - e_src_img).reshape(-1, e_out.shape[-1]),
        (e_sty_txt - e_src_txt).reshape(-1, e_sty_txt.shape[-1]),
    )
    return rows.mean()


def sample_patch_boxes(
    height: int,
    width: int,
    patch_size: int,
    count: int,
    rng: torch.Generator
) -> List[Box]:
    """
    Draw `count` square (x, y, w, h) boxes uniformly inside the image.

    Raises:
        InvalidInputError: If the patch does not fit
    """
    if patch_size > min(height, width):
        raise InvalidInputError(
            f"patch_size {patch_size} exceeds image size {width}x{height}"
        )
    xs = torch.randint(0, width - patch_size + 1, (count,), generator=rng)
    ys = torch.randint(0, height - patch_size + 1, (count,), generator=rng)
    return [(int(x), int(y), patch_size, patch_size) for x, y in zip(xs, ys)]


def gate_patch_boxes(mask: torch.Tensor, boxes: List[Box], threshold: float) -> List[Box]:
    """Boxes whose mean mask value reaches the threshold."""
    return [box for box in boxes if patch_mask_mean(mask, box) >= threshold]


def _crop(image: torch.Tensor, box: Box) -> torch.Tensor:
    x, y, w, h = box
    return image[..., y:y + h, x:x + w]


def patch_loss(
    stylized: torch.Tensor,
    content: torch.Tensor,
    mask: torch.Tensor,
    e_sty_txt: torch.Tensor,
    e_src_txt: torch.Tensor,
    cfg: StyleConfig,
    backend: PerceptionBackend,
    rng: torch.Generator
) -> Tuple[torch.Tensor, int]:
    """
    Mask-gated patchwise directional loss.

    Samples n_patches boxes, keeps those whose mean mask reaches the gate
    threshold, augments each kept stylized patch in sampling order, and scores
    it against the resized (unaugmented) content patch at the same location.
    With reject_tau set, per-patch losses below it count as 0.

    Returns:
        (mean over kept patches, number kept); (0, 0) when none is kept

    Raises:
        InvalidInputError: On size mismatches or a patch larger than the image
    """
    check_same_size(stylized, content, "patch_loss images")
    check_mask(mask, stylized)

    height, width = stylized.shape[-2:]
    gating = threshold_mask(mask, cfg.threshold) if cfg.mask_binarize else mask
    boxes = sample_patch_boxes(height, width, cfg.patch_size, cfg.n_patches, rng)
    kept = gate_patch_boxes(gating, boxes, cfg.gate_threshold)
    if not kept:
        return stylized.new_zeros(()), 0

    resolution = backend.input_resolution
    augmented = torch.cat([
        augment_patch(_crop(stylized, box), cfg.augment_strength, rng, resolution)
        for box in kept
    ])
    e_patches = backend.embed_images(augmented)

    with torch.no_grad():
        source = torch.cat([resize_bilinear(_crop(content, box), resolution, resolution) for box in kept])
        e_source = backend.embed_images(source)

    delta_text = (e_sty_txt - e_src_txt).to(e_patches.dtype)
    per_patch = directional_loss_rows(e_patches - e_source, delta_text)
    if cfg.reject_tau is not None:
        per_patch = torch.where(per_patch < cfg.reject_tau, torch.zeros_like(per_patch), per_patch)
    return per_patch.mean(), len(kept)


class VggFeatures(nn.Module):
    """
    VGG-19 activations at conv4_2 and conv5_2 for the perceptual content loss.

    Inputs are [0, 1] images; ImageNet normalization happens inside.
    """
    LAYERS = {21: 'conv4_2', 30: 'conv5_2'}

    def __init__(self) -> None:
        super().__init__()
        try:
            from torchvision.models import vgg19, VGG19_Weights  # pylint: disable=import-outside-toplevel
            features = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).features
        except (ImportError, RuntimeError, OSError) as exc:
            raise BackendError(f"Cannot load VGG-19 weights: {exc}") from exc
        self.features = features[:max(self.LAYERS) + 1].eval()
        for param in self.features.parameters():
            param.requires_grad_(False)
        self.register_buffer('mean', torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1))
        self.register_buffer('std', torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1))

    def forward(self, image: torch.Tensor) -> List[torch.Tensor]:
        x = (image.float() - self.mean) / self.std
        outputs = []
        for index, layer in enumerate(self.features):
            x = layer(x)
            if index in self.LAYERS:
                outputs.append(x)
        return outputs


def content_loss(
    stylized: torch.Tensor,
    content: torch.Tensor,
    perceptual: Optional[nn.Module] = None
) -> torch.Tensor:
    """
    Content preservation.

    With a feature extractor: sum over its layers of the feature MSE.
    Without one: MSE between the images average-pooled to a quarter of
    their size (at least 1x1).

    Raises:
        InvalidInputError: If the images differ in shape
    """
    check_same_size(stylized, content, "content_loss images")
    if perceptual is not None:
        pairs = zip(perceptual(stylized), perceptual(content))
        return sum(F.mse_loss(s, c.detach()) for s, c in pairs).to(stylized.dtype)

    height, width = stylized.shape[-2:]
    size = (max(1, height // CONTENT_POOL), max(1, width // CONTENT_POOL))
    return F.mse_loss(F.adaptive_avg_pool2d(stylized, size), F.adaptive_avg_pool2d(content, size))


def tv_loss(image: torch.Tensor) -> torch.Tensor:
    """
    Total variation: mean squared horizontal plus mean squared vertical
    forward differences, averaged over channels. A direction with no
    neighbours contributes 0.

    Raises:
        InvalidInputError: Non-4D input, or an image smaller than 2 in both directions
    """
    if image.dim() != 4:
        raise InvalidInputError(f"tv_loss expects (N, C, H, W), got {tuple(image.shape)}")
    height, width = image.shape[-2:]
    if height < 2 and width < 2:
        raise InvalidInputError(f"tv_loss needs at least two pixels in a row or column, got {height}x{width}")

    total = image.new_zeros(())
    if width >= 2:
        total = total + (image[..., :, 1:] - image[..., :, :-1]).pow(2).mean()
    if height >= 2:
        total = total + (image[..., 1:, :] - image[..., :-1, :]).pow(2).mean()
    return total


def mask_loss(stylized: torch.Tensor, content: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """
    Outside-mask preservation: mean over pixels and channels of
    (1 - M) * (stylized - content)^2.

    Raises:
        InvalidInputError: On shape mismatches
    """
    check_same_size(stylized, content, "mask_loss images")
    check_mask(mask, stylized)
    return ((1.0 - mask) * (stylized - content).pow(2)).mean()


@dataclass
class LossContext:
    """
    Per-run constants of the objective, computed once before optimization.

    Attributes:
        content: Content image
        mask: Effective mask (binarized at threshold when configured)
        e_src_img: Content image embedding
        e_sty_txt: Embedding of the stylized content text
        e_src_txt: Embedding of the source text
        cfg: Style configuration
        backend: Perception backend
    """
    content: torch.Tensor
    mask: torch.Tensor
    e_src_img: torch.Tensor
    e_sty_txt: torch.Tensor
    e_src_txt: torch.Tensor
    cfg: StyleConfig
    backend: PerceptionBackend


def build_loss_context(
    content: torch.Tensor,
    mask: torch.Tensor,
    parsed: ParsedInstruction,
    cfg: StyleConfig,
    backend: PerceptionBackend
) -> LossContext:
    """
    Validate inputs and precompute embeddings that do not change per step.

    Raises:
        InvalidInputError: Invalid content image or mask
    """
    check_image(content, 'content')
    check_mask(mask, content)
    embed = encode_text_with_templates if cfg.text_templates else encode_text
    with torch.no_grad():
        e_src_img = encode_image(backend, content)
        e_sty_txt = embed(backend, parsed.stylized_content, dtype=content.dtype)
        e_src_txt = embed(backend, cfg.source_text, dtype=content.dtype)
    effective = threshold_mask(mask, cfg.threshold) if cfg.mask_binarize else mask
    return LossContext(content, effective, e_src_img, e_sty_txt, e_src_txt, cfg, backend)


def loss_terms(
    stylized: torch.Tensor,
    ctx: LossContext,
    rng: torch.Generator
) -> Tuple[Dict[str, torch.Tensor], torch.Tensor, int]:
    """
    Evaluate every term and the weighted total as differentiable tensors.

    Returns:
        (terms by name, total, patches used)
    """
    cfg = ctx.cfg
    check_image(stylized, 'stylized')
    check_same_size(stylized, ctx.content, "stylized vs content")

    global_view = stylized
    if cfg.dir_on_composite:
        global_view = ctx.mask * stylized + (1.0 - ctx.mask) * ctx.content
    e_out = ctx.backend.embed_images(global_view)

    patch, used = patch_loss(
        stylized, ctx.content, ctx.mask, ctx.e_sty_txt, ctx.e_src_txt, cfg, ctx.backend, rng
    )
    terms = {
        'dir': directional_loss(e_out, ctx.e_src_img, ctx.e_sty_txt, ctx.e_src_txt),
        'patch': patch,
        'content': content_loss(stylized, ctx.content, ctx.backend.perceptual),
        'tv': tv_loss(stylized),
        'mask': mask_loss(stylized, ctx.content, ctx.mask),
    }
    total = (
        cfg.lambda_d * terms['dir']
        + cfg.lambda_p * terms['patch']
        + cfg.lambda_c * terms['content']
        + cfg.lambda_tv * terms['tv']
        + cfg.mask_weight * terms['mask']
    )
    return terms, total, used


def to_breakdown(terms: Dict[str, torch.Tensor], total: torch.Tensor, used: int) -> LossBreakdown:
    """Detach a step's terms into a LossBreakdown."""
    return LossBreakdown(
        dir=terms['dir'].item(),
        patch=terms['patch'].item(),
        content=terms['content'].item(),
        tv=terms['tv'].item(),
        mask=terms['mask'].item(),
        total=total.item(),
        patches_used=used,
    )


def total_loss(
    stylized: torch.Tensor,
    content: torch.Tensor,
    mask: torch.Tensor,
    parsed: ParsedInstruction,
    cfg: StyleConfig,
    backend: PerceptionBackend,
    rng: torch.Generator
) -> LossBreakdown:
    """
    All terms and their weighted total for one stylized image.

    Raises:
        InvalidInputError: From any component
    """
    ctx = build_loss_context(content, mask, parsed, cfg, backend)
    terms, total, used = loss_terms(stylized, ctx, rng)
    return to_breakdown(terms, total, used)
