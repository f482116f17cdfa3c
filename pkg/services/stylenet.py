"""
StyleNet: the small encoder-decoder optimized per image.

Three stride-2 conv blocks (16, 32, 64 channels), three residual blocks at 64,
three nearest-upsample conv blocks back to 16 channels, and a zero-initialized
3-channel head. The head output is added to the input and clamped to [0, 1],
so a fresh network is the identity.
"""

import logging
import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from models.errors import InvalidInputError

logger = logging.getLogger(__name__)

SIZE_MULTIPLE = 8
NEGATIVE_SLOPE = 0.2


def _conv(in_channels: int, out_channels: int, stride: int = 1) -> nn.Conv2d:
    return nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=stride, padding=1)


class ResidualBlock(nn.Module):
    """conv-act-conv with an identity shortcut."""

    def __init__(self, channels: int) -> None:
        super().__init__()
        self.conv1 = _conv(channels, channels)
        self.conv2 = _conv(channels, channels)
        self.act = nn.LeakyReLU(NEGATIVE_SLOPE)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.conv2(self.act(self.conv1(x)))


class StyleNet(nn.Module):
    """
    Encoder-decoder with a global residual connection.

    Attributes:
        widths: Encoder channel widths, mirrored by the decoder
        encoder, residual, decoder: Hidden layers
        head: Final 3-channel projection
    """

    def __init__(self, widths=(16, 32, 64), res_blocks: int = 3) -> None:
        super().__init__()
        self.widths = tuple(widths)
        act = nn.LeakyReLU(NEGATIVE_SLOPE)

        encoder, channels = [], 3
        for width in self.widths:
            encoder += [_conv(channels, width, stride=2), act]
            channels = width
        self.encoder = nn.Sequential(*encoder)

        self.residual = nn.Sequential(*[ResidualBlock(channels) for _ in range(res_blocks)])

        decoder = []
        for width in tuple(reversed(self.widths[:-1])) + (self.widths[0],):
            decoder += [nn.Upsample(scale_factor=2, mode='nearest'), _conv(channels, width), act]
            channels = width
        self.decoder = nn.Sequential(*decoder)

        self.head = _conv(channels, 3)

    @property
    def size_multiple(self) -> int:
        """Input sides must be multiples of this."""
        return 2 ** len(self.widths)

    def init_params(self, seed: int) -> 'StyleNet':
        """
        Seeded fan-in normal init (std sqrt(2 / fan_in)), zero biases, zero head.
        """
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for module in self.modules():
                if not isinstance(module, nn.Conv2d):
                    continue
                if module is self.head:
                    module.weight.zero_()
                else:
                    fan_in = module.weight[0].numel()
                    draw = torch.randn(module.weight.shape, generator=generator, dtype=torch.float64)
                    module.weight.copy_(draw * math.sqrt(2.0 / fan_in))
                module.bias.zero_()
        return self

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        """
        Stylize an image whose sides are multiples of 8.

        Raises:
            InvalidInputError: If a side is not a multiple of 8
        """
        height, width = image.shape[-2:]
        multiple = self.size_multiple
        if height % multiple or width % multiple:
            raise InvalidInputError(
                f"StyleNet input {height}x{width} is not a multiple of {multiple}; use forward_padded"
            )
        hidden = self.decoder(self.residual(self.encoder(image)))
        return (image + self.head(hidden)).clamp(0.0, 1.0)

    def forward_padded(self, image: torch.Tensor) -> torch.Tensor:
        """Reflect-pad to the next multiple of 8, run forward, crop back."""
        height, width = image.shape[-2:]
        multiple = self.size_multiple
        pad_h = (-height) % multiple
        pad_w = (-width) % multiple
        if not pad_h and not pad_w:
            return self.forward(image)
        mode = 'reflect' if pad_h < height and pad_w < width else 'replicate'
        padded = F.pad(image, (0, pad_w, 0, pad_h), mode=mode)
        return self.forward(padded)[..., :height, :width]


def init_params(seed: int, dtype: torch.dtype = torch.float32) -> StyleNet:
    """A freshly initialized StyleNet for one optimization job."""
    return StyleNet().init_params(seed).to(dtype)


def forward(params: StyleNet, image: torch.Tensor) -> torch.Tensor:
    """Run a StyleNet on an image with sides divisible by 8."""
    return params(image)
