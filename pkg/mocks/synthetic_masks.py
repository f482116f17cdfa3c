"""
Synthetic mask source: rectangles and ellipses in normalized coordinates.

A pixel belongs to the shape when its center ((j + 0.5) / W, (i + 0.5) / H)
lies inside it, so a rect with cx=0.25, w=0.5 covers exactly the left half.
"""

import torch

from models.enums import MaskProviderKind, MaskShape
from models.mask_provider import SyntheticShape
from services.segmentation import MaskSource


def render_shape(shape: SyntheticShape, height: int, width: int,
                 dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Binary (1, 1, height, width) mask of a shape."""
    ys = (torch.arange(height, dtype=torch.float64) + 0.5) / height
    xs = (torch.arange(width, dtype=torch.float64) + 0.5) / width
    grid_y, grid_x = torch.meshgrid(ys, xs, indexing='ij')
    dx = grid_x - shape.cx
    dy = grid_y - shape.cy

    if shape.shape == MaskShape.RECT:
        inside = (dx.abs() <= shape.w / 2) & (dy.abs() <= shape.h / 2)
    else:
        if shape.w == 0 or shape.h == 0:
            inside = torch.zeros_like(dx, dtype=torch.bool)
        else:
            inside = (dx / (shape.w / 2)) ** 2 + (dy / (shape.h / 2)) ** 2 <= 1.0
    return inside.to(dtype)[None, None]


class SyntheticMaskSource(MaskSource):
    """Mask source that ignores the object text and draws a fixed shape."""
    kind = MaskProviderKind.SYNTHETIC

    def __init__(self, shape: SyntheticShape = None) -> None:
        self.shape = shape or SyntheticShape()

    def produce(self, image: torch.Tensor, object_text: str) -> torch.Tensor:
        return render_shape(self.shape, image.shape[-2], image.shape[-1], image.dtype)


def left_half() -> SyntheticShape:
    """Rectangle covering the left half of the image."""
    return SyntheticShape(shape=MaskShape.RECT, cx=0.25, cy=0.5, w=0.5, h=1.0)
