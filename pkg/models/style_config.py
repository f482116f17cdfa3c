"""
Configuration models: loss weights and optimizer schedule, the LLM endpoint,
and the aggregate settings of one run.
"""

import math
from dataclasses import dataclass, field, fields, asdict, replace
from typing import Any, Dict, Optional

from models.backend_descriptor import BackendDescriptor
from models.enums import CompositeMode
from models.errors import InvalidInputError
from models.mask_provider import SyntheticShape


@dataclass(frozen=True)
class StyleConfig:
    """
    Weights, gating threshold, patch sampling and optimizer schedule.

    Default weights follow the CLIP style-transfer recipe; lambda_m is chosen so
    background preservation dominates at convergence. threshold both gates
    patch participation and multiplies the mask term; each role has a toggle.

    Attributes:
        lambda_d: Weight of the global directional loss
        lambda_p: Weight of the gated patch loss
        lambda_c: Weight of the content loss
        lambda_tv: Weight of the total-variation loss
        lambda_m: Weight of the mask preservation loss
        threshold: Stylization threshold t in [0, 1]
        patch_size: Side of sampled square patches, pixels (>= 8)
        n_patches: Patches sampled per step (>= 1)
        augment_strength: Perspective warp strength in [0, 1]
        reject_tau: Per-patch losses below this contribute 0 (None disables)
        source_text: Text describing the unstylized source
        iterations: Optimization steps
        lr: Adam step size
        lr_decay_step: Step at which lr is decayed (None -> iterations // 2)
        lr_decay_factor: Multiplicative lr decay
        seed: Seed for network init and patch sampling
        gate_patches: Keep a patch only if its mean mask >= threshold
        weight_mask_by_threshold: Multiply the mask term by threshold
        dir_on_composite: Global directional loss on the mask composite
        mask_binarize: Binarize the mask at threshold before use
        text_templates: Average text embeddings over photo templates
    """
    lambda_d: float = 500.0
    lambda_p: float = 9000.0
    lambda_c: float = 150.0
    lambda_tv: float = 2e-3
    lambda_m: float = 1000.0
    threshold: float = 0.7
    patch_size: int = 128
    n_patches: int = 64
    augment_strength: float = 0.5
    reject_tau: Optional[float] = None
    source_text: str = "a Photo"
    iterations: int = 200
    lr: float = 5e-4
    lr_decay_step: Optional[int] = None
    lr_decay_factor: float = 0.5
    seed: int = 0
    gate_patches: bool = True
    weight_mask_by_threshold: bool = True
    dir_on_composite: bool = False
    mask_binarize: bool = False
    text_templates: bool = False

    def __post_init__(self) -> None:
        """Validate ranges."""
        for name in ('lambda_d', 'lambda_p', 'lambda_c', 'lambda_tv', 'lambda_m'):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidInputError(f"{name} must be a finite non-negative number, got {value}")
        if not 0.0 <= self.threshold <= 1.0:
            raise InvalidInputError(f"threshold {self.threshold} outside [0, 1]")
        if self.patch_size < 8:
            raise InvalidInputError(f"patch_size {self.patch_size} must be >= 8")
        if self.n_patches < 1:
            raise InvalidInputError(f"n_patches {self.n_patches} must be >= 1")
        if not 0.0 <= self.augment_strength <= 1.0:
            raise InvalidInputError(f"augment_strength {self.augment_strength} outside [0, 1]")
        if self.iterations < 0:
            raise InvalidInputError(f"iterations {self.iterations} must be >= 0")
        if not self.lr > 0:
            raise InvalidInputError(f"lr {self.lr} must be positive")
        if self.lr_decay_step is not None and self.lr_decay_step < 1:
            raise InvalidInputError(f"lr_decay_step {self.lr_decay_step} must be >= 1")
        if not 0.0 < self.lr_decay_factor <= 1.0:
            raise InvalidInputError(f"lr_decay_factor {self.lr_decay_factor} outside (0, 1]")
        if not self.source_text.strip():
            raise InvalidInputError("source_text is empty")

    @property
    def effective_decay_step(self) -> int:
        """Decay step, defaulting to half the iterations."""
        if self.lr_decay_step is not None:
            return self.lr_decay_step
        return max(1, self.iterations // 2)

    @property
    def mask_weight(self) -> float:
        """Multiplier applied to the mask loss in the total."""
        if self.weight_mask_by_threshold:
            return self.threshold * self.lambda_m
        return self.lambda_m

    @property
    def gate_threshold(self) -> float:
        """Mean-mask level a patch needs to participate."""
        return self.threshold if self.gate_patches else 0.0

    def with_overrides(self, overrides: Dict[str, Any]) -> 'StyleConfig':
        """
        Return a copy with some fields replaced.

        Raises:
            InvalidInputError: If a key is not a StyleConfig field
        """
        unknown = sorted(set(overrides) - self.field_names())
        if unknown:
            raise InvalidInputError(f"Unknown StyleConfig field(s): {', '.join(unknown)}")
        return replace(self, **overrides)

    @classmethod
    def field_names(cls) -> set:
        """Names accepted in config files and overrides."""
        return {f.name for f in fields(cls)}

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'StyleConfig':
        """Create StyleConfig from dictionary, defaults for absent keys."""
        return cls().with_overrides(data)


@dataclass(frozen=True)
class EndpointConfig:
    """
    Chat-completion endpoint settings.

    Attributes:
        base_url: Base URL, e.g. "http://localhost:8000/v1"
        model: Model id sent with each request
        api_key: Optional bearer token
        temperature: Sampling temperature
        max_tokens: Completion length cap
        max_retries: Retries after the first attempt on transport errors
        backoff: Base seconds of the exponential backoff
        timeout: Per-request timeout, seconds
    """
    base_url: str
    model: str
    api_key: Optional[str] = None
    temperature: float = 0.0
    max_tokens: int = 256
    max_retries: int = 3
    backoff: float = 1.0
    timeout: float = 30.0

    def __post_init__(self) -> None:
        """Validate endpoint settings."""
        if not self.base_url:
            raise InvalidInputError("LLM endpoint base_url is empty")
        if not self.model:
            raise InvalidInputError("LLM model name is empty")
        if self.max_retries < 0:
            raise InvalidInputError("max_retries must be >= 0")
        if self.max_tokens < 1:
            raise InvalidInputError("max_tokens must be >= 1")

    @property
    def chat_url(self) -> str:
        """Full URL of the chat-completions route."""
        return self.base_url.rstrip('/') + '/chat/completions'


@dataclass(frozen=True)
class RunSettings:
    """
    Everything a run needs besides its manifest.

    Attributes:
        style: Loss and optimizer configuration
        backend: Perception backend selection
        endpoint: LLM endpoint, None for the rule-based parser
        mask_model_endpoint: URL of an external segmentation endpoint
        mask_model_checkpoint: Path of a TorchScript segmentation model
        mask_synthetic: Synthetic mask shape used when nothing else is given
        composite: Post-process blend mode
        jobs: Batch parallelism
        output_dir: Directory for outputs without an explicit path
        image_size: Longer-side cap applied to input images
        log_every: Steps between progress log lines
    """
    style: StyleConfig = field(default_factory=StyleConfig)
    backend: BackendDescriptor = field(default_factory=BackendDescriptor)
    endpoint: Optional[EndpointConfig] = None
    mask_model_endpoint: Optional[str] = None
    mask_model_checkpoint: Optional[str] = None
    mask_synthetic: Optional[SyntheticShape] = None
    composite: CompositeMode = CompositeMode.OFF
    jobs: int = 1
    output_dir: str = 'output'
    image_size: int = 512
    log_every: int = 20

    def __post_init__(self) -> None:
        """Validate run-level values."""
        if self.jobs < 1:
            raise InvalidInputError(f"jobs {self.jobs} must be >= 1")
        if self.image_size < 8:
            raise InvalidInputError(f"image_size {self.image_size} must be >= 8")
        if self.log_every < 1:
            raise InvalidInputError(f"log_every {self.log_every} must be >= 1")
