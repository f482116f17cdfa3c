"""
Per-image optimization of a StyleNet against the localized objective, and the
optional mask composite post-process.
"""

import logging
from typing import Optional, Tuple

import torch
from torch.optim import Adam
from torch.optim.lr_scheduler import MultiStepLR

from models.errors import NumericError
from models.instruction import ParsedInstruction
from models.optim_state import OptimState
from models.style_config import StyleConfig
from presenters.report_presenter import ReportPresenter
from services.image_io import check_mask, check_same_size
from services.losses import build_loss_context, loss_terms, to_breakdown
from services.perception import PerceptionBackend
from services.segmentation import threshold_mask
from services.stylenet import init_params

logger = logging.getLogger(__name__)


def optimize(
    content: torch.Tensor,
    parsed: ParsedInstruction,
    mask: torch.Tensor,
    cfg: StyleConfig,
    backend: PerceptionBackend,
    log_every: int = 20,
    presenter: Optional[ReportPresenter] = None
) -> Tuple[torch.Tensor, OptimState]:
    """
    Fit a fresh StyleNet so that f(content) minimizes the total loss.

    Adam at cfg.lr, multiplied by cfg.lr_decay_factor once at
    cfg.effective_decay_step. Text and content embeddings are computed once.
    Patch sampling and augmentation draw from a generator seeded with cfg.seed,
    so two runs with equal inputs give equal histories.

    Returns:
        (final stylized image, optimization state with one entry per step)

    Raises:
        InvalidInputError: Inconsistent inputs
        NumericError: A loss term became non-finite (names term and step)
    """
    presenter = presenter or ReportPresenter()
    ctx = build_loss_context(content, mask, parsed, cfg, backend)
    net = init_params(cfg.seed, dtype=content.dtype).to(content.device)
    state = OptimState(lr=cfg.lr)

    if cfg.iterations == 0:
        with torch.no_grad():
            return net.forward_padded(content), state

    rng = torch.Generator().manual_seed(cfg.seed)
    optimizer = Adam(net.parameters(), lr=cfg.lr)
    scheduler = MultiStepLR(optimizer, milestones=[cfg.effective_decay_step], gamma=cfg.lr_decay_factor)
    logger.info(
        "Optimizing %dx%d image for %r over %d steps",
        content.shape[-1], content.shape[-2], parsed.stylized_content, cfg.iterations,
    )

    for step in range(1, cfg.iterations + 1):
        optimizer.zero_grad()
        stylized = net.forward_padded(content)
        terms, total, used = loss_terms(stylized, ctx, rng)
        _check_finite_terms(terms, total, step)

        total.backward()
        lr = optimizer.param_groups[0]['lr']
        optimizer.step()
        scheduler.step()

        breakdown = to_breakdown(terms, total, used)
        state.record(breakdown, lr)
        if step % log_every == 0 or step == cfg.iterations:
            logger.info(presenter.format_step(step, cfg.iterations, breakdown, lr))

    with torch.no_grad():
        output = net.forward_padded(content)
    return output, state


def _check_finite_terms(terms, total: torch.Tensor, step: int) -> None:
    for name, value in terms.items():
        if not torch.isfinite(value).all():
            raise NumericError(f"Loss term '{name}' is not finite at step {step}", term=name, step=step)
    if not torch.isfinite(total).all():
        raise NumericError(f"Total loss is not finite at step {step}", term='total', step=step)


def composite(
    stylized: torch.Tensor,
    content: torch.Tensor,
    mask: torch.Tensor,
    hard: bool = False
) -> torch.Tensor:
    """
    Blend M * stylized + (1 - M) * content; hard mode binarizes M at 0.5 first.

    Raises:
        InvalidInputError: On shape mismatches
    """
    check_same_size(stylized, content, "composite images")
    check_mask(mask, stylized)
    weight = threshold_mask(mask, 0.5) if hard else mask
    return weight * stylized + (1.0 - weight) * content
