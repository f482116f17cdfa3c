"""
Mock images and LLM replies for tests and offline demos.

Provides synthetic content images keyed by scenario name and sample model
outputs in the shapes real chat models produce.
"""

import torch

SAILBOAT_INSTRUCTION = (
    "Turn the white sailboat with three blue sails floating on the sea to the art on fire."
)
SAILBOAT_CONTENT = "art on fire"
SAILBOAT_OBJECTS = "the white sailboat with three blue sails floating on the sea"

# A reply wrapped in prose and a Markdown fence, keys spelled with spaces.
SAMPLE_LLM_RESPONSE = (
    "Sure! Here is the split of your instruction:\n"
    "```json\n"
    "{\n"
    f'  "Stylized Content": "{SAILBOAT_CONTENT}",\n'
    f'  "Stylized Objects": "{SAILBOAT_OBJECTS}"\n'
    "}\n"
    "```\n"
    "Let me know if you need anything else."
)


def get_halves_scenario(size: int = 64, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Reddish left half, bluish right half, with a mild vertical ramp."""
    image = torch.empty(1, 3, size, size, dtype=dtype)
    ramp = torch.linspace(0.0, 0.2, size, dtype=dtype).view(size, 1)
    half = size // 2
    image[0, 0, :, :half] = 0.7 + ramp
    image[0, 1, :, :half] = 0.3 + ramp
    image[0, 2, :, :half] = 0.2 + ramp
    image[0, 0, :, half:] = 0.2 + ramp
    image[0, 1, :, half:] = 0.35 + ramp
    image[0, 2, :, half:] = 0.7 + ramp
    return image


def get_gradient_scenario(size: int = 64, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Horizontal, vertical and diagonal ramps in the three channels."""
    ys = torch.linspace(0.0, 1.0, size, dtype=dtype).view(size, 1).expand(size, size)
    xs = torch.linspace(0.0, 1.0, size, dtype=dtype).view(1, size).expand(size, size)
    return torch.stack([xs, ys, (xs + ys) / 2]).unsqueeze(0).contiguous()


def get_checkerboard_scenario(size: int = 128, cells: int = 8,
                              dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Black and white checkerboard with `cells` squares per side."""
    index = torch.arange(size) * cells // size
    board = ((index.view(size, 1) + index.view(1, size)) % 2).to(dtype)
    return board.expand(3, size, size).unsqueeze(0).contiguous()


def get_noise_scenario(size: int = 32, seed: int = 0, low: float = 0.0, high: float = 1.0,
                       dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Uniform noise in [low, high] from a seeded generator."""
    generator = torch.Generator().manual_seed(seed)
    noise = torch.rand(1, 3, size, size, generator=generator, dtype=dtype)
    return low + (high - low) * noise


SCENARIOS = {
    'halves': get_halves_scenario,
    'gradient': get_gradient_scenario,
    'checkerboard': get_checkerboard_scenario,
    'noise': get_noise_scenario,
}
