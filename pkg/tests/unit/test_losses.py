"""
Unit tests for the loss terms and their weighted total.
"""

import pytest
import torch

from mocks.mock_responses import get_gradient_scenario, get_halves_scenario, get_noise_scenario
from mocks.synthetic_masks import left_half, render_shape
from models.errors import InvalidInputError
from models.instruction import ParsedInstruction
from models.style_config import StyleConfig
from services.losses import (
    build_loss_context,
    content_loss,
    directional_loss,
    gate_patch_boxes,
    loss_terms,
    mask_loss,
    patch_loss,
    sample_patch_boxes,
    total_loss,
    tv_loss,
)
from services.perception import encode_text

PARSED = ParsedInstruction("art on fire", "the boat")


def _unit(*values):
    row = torch.tensor([values], dtype=torch.float64)
    return row / row.norm()


class TestDirectionalLoss:
    """Tests for the directional loss."""

    def test_aligned_changes(self):
        """Test an image change parallel to the text change gives 0."""
        src = _unit(1.0, 0.0, 0.0)
        out = _unit(1.0, 1.0, 0.0)

        loss = directional_loss(out, src, out, src)

        assert loss.item() == pytest.approx(0.0, abs=1e-12)

    def test_opposite_changes(self):
        """Test opposite changes give 2."""
        src = _unit(1.0, 0.0, 0.0)
        out = _unit(1.0, 1.0, 0.0)

        loss = directional_loss(out, src, src, out)

        assert loss.item() == pytest.approx(2.0)

    def test_orthogonal_changes(self):
        """Test orthogonal changes give 1."""
        src = _unit(1.0, 0.0, 0.0)

        loss = directional_loss(_unit(1.0, 1.0, 0.0), src, _unit(1.0, 0.0, 1.0), src)

        assert loss.item() == pytest.approx(1.0)

    def test_no_image_change(self):
        """Test an unchanged image gives exactly 1."""
        src = _unit(0.3, 0.4, 0.5)

        assert directional_loss(src, src, _unit(1.0, 0.0, 0.0), _unit(0.0, 1.0, 0.0)).item() == 1.0

    def test_no_text_change(self):
        """Test identical texts give exactly 1."""
        text = _unit(0.0, 1.0, 0.0)

        assert directional_loss(_unit(1.0, 1.0, 0.0), _unit(1.0, 0.0, 0.0), text, text).item() == 1.0

    def test_range_on_random_embeddings(self):
        """Test the loss stays in [0, 2]."""
        generator = torch.Generator().manual_seed(0)
        for _ in range(20):
            rows = [torch.randn(1, 8, generator=generator) for _ in range(4)]
            loss = directional_loss(*rows).item()
            assert 0.0 <= loss <= 2.0

    def test_non_finite(self):
        """Test NaN embeddings are rejected."""
        bad = torch.tensor([[float('nan'), 0.0]])

        with pytest.raises(InvalidInputError):
            directional_loss(bad, bad, bad, bad)


class TestPatchSampling:
    """Tests for patch box sampling and gating."""

    def test_boxes_inside(self):
        """Test boxes lie inside the image."""
        boxes = sample_patch_boxes(40, 56, 16, 50, torch.Generator().manual_seed(0))

        assert len(boxes) == 50
        for x, y, w, h in boxes:
            assert (w, h) == (16, 16)
            assert 0 <= x <= 40 and 0 <= y <= 24

    def test_patch_larger_than_image(self):
        """Test patches that do not fit are rejected."""
        with pytest.raises(InvalidInputError):
            sample_patch_boxes(32, 32, 48, 1, torch.Generator())

    def test_gating(self):
        """Test only boxes with enough mask survive."""
        mask = render_shape(left_half(), 32, 32)
        boxes = [(0, 0, 16, 16), (8, 0, 16, 16), (16, 0, 16, 16)]

        assert gate_patch_boxes(mask, boxes, 0.7) == [(0, 0, 16, 16)]
        assert gate_patch_boxes(mask, boxes, 0.5) == [(0, 0, 16, 16), (8, 0, 16, 16)]
        assert gate_patch_boxes(mask, boxes, 0.0) == boxes

    def test_gating_monotone_in_threshold(self):
        """Test patches kept at a higher threshold are also kept at a lower one."""
        mask = torch.linspace(0, 1, 64).view(1, 64).expand(64, 64).reshape(1, 1, 64, 64).contiguous()
        boxes = sample_patch_boxes(64, 64, 16, 64, torch.Generator().manual_seed(0))

        high = gate_patch_boxes(mask, boxes, 0.8)
        low = gate_patch_boxes(mask, boxes, 0.6)

        assert high
        assert set(high) <= set(low)
        assert len(low) > len(high)


class TestPatchLoss:
    """Tests for the gated patch loss."""

    @pytest.fixture
    def texts(self, backend):
        """Style and source text embeddings."""
        return encode_text(backend, "art on fire"), encode_text(backend, "a Photo")

    def test_empty_mask_keeps_nothing(self, backend, texts):
        """Test an all-zero mask gates out every patch."""
        image = get_halves_scenario(32)
        cfg = StyleConfig(patch_size=16, n_patches=8)

        loss, used = patch_loss(image, image, torch.zeros(1, 1, 32, 32), *texts, cfg, backend,
                                torch.Generator().manual_seed(0))

        assert used == 0
        assert loss.item() == 0.0

    def test_full_mask_keeps_all(self, backend, texts):
        """Test a full mask keeps every sampled patch."""
        image = get_halves_scenario(32)
        cfg = StyleConfig(patch_size=16, n_patches=6)

        _, used = patch_loss(image, image, torch.ones(1, 1, 32, 32), *texts, cfg, backend,
                             torch.Generator().manual_seed(0))

        assert used == 6

    def test_gate_disabled(self, backend, texts):
        """Test disabling gating keeps patches outside the mask."""
        image = get_halves_scenario(32)
        cfg = StyleConfig(patch_size=16, n_patches=6, gate_patches=False)

        _, used = patch_loss(image, image, torch.zeros(1, 1, 32, 32), *texts, cfg, backend,
                             torch.Generator().manual_seed(0))

        assert used == 6

    def test_unchanged_image_without_warp(self, backend, texts):
        """Test unwarped patches of an unchanged image have no direction, so loss 1."""
        image = get_gradient_scenario(32)
        cfg = StyleConfig(patch_size=16, n_patches=4, augment_strength=0.0)

        loss, _ = patch_loss(image, image, torch.ones(1, 1, 32, 32), *texts, cfg, backend,
                             torch.Generator().manual_seed(0))

        assert loss.item() == pytest.approx(1.0)

    def test_reject_tau_zeroes_low_losses(self, backend, texts):
        """Test per-patch losses under reject_tau count as 0."""
        image = get_gradient_scenario(32)
        cfg = StyleConfig(patch_size=16, n_patches=4, augment_strength=0.0, reject_tau=1.5)

        loss, used = patch_loss(image, image, torch.ones(1, 1, 32, 32), *texts, cfg, backend,
                                torch.Generator().manual_seed(0))

        assert used == 4
        assert loss.item() == 0.0

    def test_same_generator_same_loss(self, backend, texts):
        """Test the loss is a function of the generator state."""
        content = get_halves_scenario(32)
        stylized = get_noise_scenario(32, seed=1)
        cfg = StyleConfig(patch_size=16, n_patches=4)

        first, _ = patch_loss(stylized, content, torch.ones(1, 1, 32, 32), *texts, cfg, backend,
                              torch.Generator().manual_seed(7))
        second, _ = patch_loss(stylized, content, torch.ones(1, 1, 32, 32), *texts, cfg, backend,
                               torch.Generator().manual_seed(7))

        assert first.item() == second.item()

    def test_mask_size_mismatch(self, backend, texts):
        """Test masks of another size are rejected."""
        image = get_halves_scenario(32)

        with pytest.raises(InvalidInputError):
            patch_loss(image, image, torch.ones(1, 1, 16, 16), *texts, StyleConfig(patch_size=16),
                       backend, torch.Generator())


class TestPixelTerms:
    """Tests for the content, TV and mask terms."""

    def test_content_zero_at_identity(self):
        """Test identical images have zero content loss."""
        image = get_gradient_scenario(32)

        assert content_loss(image, image).item() == 0.0

    def test_content_pools(self):
        """Test the pixel content loss compares quarter-size averages."""
        content = torch.zeros(1, 3, 8, 8)
        stylized = torch.zeros(1, 3, 8, 8)
        stylized[..., ::2, :] = 1.0
        stylized[..., 1::2, :] = -1.0

        assert content_loss(stylized, content).item() == pytest.approx(0.0, abs=1e-7)

    def test_content_shape_mismatch(self):
        """Test images of different sizes are rejected."""
        with pytest.raises(InvalidInputError):
            content_loss(torch.zeros(1, 3, 8, 8), torch.zeros(1, 3, 16, 16))

    def test_tv_constant(self):
        """Test a constant image has zero total variation."""
        assert tv_loss(torch.full((1, 3, 8, 8), 0.4)).item() == 0.0

    def test_tv_value(self):
        """Test the TV of horizontal stripes."""
        image = torch.zeros(1, 1, 4, 4)
        image[..., 1::2, :] = 1.0

        assert tv_loss(image).item() == pytest.approx(1.0)

    def test_tv_single_row(self):
        """Test a one-row image uses only horizontal differences."""
        image = torch.tensor([[[[0.0, 1.0, 1.0]]]])

        assert tv_loss(image).item() == pytest.approx(0.5)

    def test_tv_single_pixel(self):
        """Test a 1x1 image is rejected."""
        with pytest.raises(InvalidInputError):
            tv_loss(torch.zeros(1, 3, 1, 1))

    def test_mask_loss_full_mask(self):
        """Test changes inside a full mask cost nothing."""
        assert mask_loss(torch.ones(1, 3, 8, 8), torch.zeros(1, 3, 8, 8), torch.ones(1, 1, 8, 8)).item() == 0.0

    def test_mask_loss_value(self):
        """Test only changes outside the mask count."""
        mask = render_shape(left_half(), 8, 8)
        stylized = torch.full((1, 3, 8, 8), 0.5)

        loss = mask_loss(stylized, torch.zeros(1, 3, 8, 8), mask)

        assert loss.item() == pytest.approx(0.125)


class TestTotalLoss:
    """Tests for the weighted total."""

    @pytest.fixture
    def cfg(self):
        """Small configuration."""
        return StyleConfig(patch_size=16, n_patches=4, threshold=0.5)

    def test_total_is_weighted_sum(self, backend, cfg):
        """Test the total combines the terms with their weights."""
        content = get_halves_scenario(32)
        stylized = get_noise_scenario(32, seed=2, low=0.2, high=0.8)
        mask = render_shape(left_half(), 32, 32)

        breakdown = total_loss(stylized, content, mask, PARSED, cfg, backend, torch.Generator().manual_seed(0))

        expected = (cfg.lambda_d * breakdown.dir + cfg.lambda_p * breakdown.patch
                    + cfg.lambda_c * breakdown.content + cfg.lambda_tv * breakdown.tv
                    + cfg.threshold * cfg.lambda_m * breakdown.mask)
        assert breakdown.total == pytest.approx(expected, rel=1e-5)

    def test_identity_breakdown(self, backend, cfg):
        """Test an unchanged image: dir 1, content 0, mask 0."""
        content = get_halves_scenario(32)

        breakdown = total_loss(content, content, torch.ones(1, 1, 32, 32), PARSED, cfg, backend,
                               torch.Generator().manual_seed(0))

        assert breakdown.dir == 1.0
        assert breakdown.content == 0.0
        assert breakdown.mask == 0.0
        assert breakdown.patches_used == 4

    def test_mask_weight_toggle(self, backend, cfg):
        """Test the unweighted mask term uses lambda_m alone."""
        content = get_halves_scenario(32)
        stylized = get_noise_scenario(32, seed=3)
        mask = torch.zeros(1, 1, 32, 32)
        weighted = total_loss(stylized, content, mask, PARSED, cfg, backend, torch.Generator().manual_seed(0))
        plain_cfg = cfg.with_overrides({'weight_mask_by_threshold': False})
        plain = total_loss(stylized, content, mask, PARSED, plain_cfg, backend, torch.Generator().manual_seed(0))

        difference = plain.total - weighted.total
        assert difference == pytest.approx((1 - cfg.threshold) * cfg.lambda_m * weighted.mask, rel=1e-4)

    def test_binarized_mask_in_context(self, backend, cfg):
        """Test mask_binarize thresholds the mask once up front."""
        content = get_halves_scenario(32)
        soft = torch.full((1, 1, 32, 32), 0.6)
        binarized_cfg = cfg.with_overrides({'mask_binarize': True})

        ctx = build_loss_context(content, soft, PARSED, binarized_cfg, backend)

        assert torch.equal(ctx.mask, torch.ones(1, 1, 32, 32))

    def test_dir_on_composite(self, backend, cfg):
        """Test with an empty mask the composite equals the content, so dir is 1."""
        content = get_halves_scenario(32)
        stylized = get_noise_scenario(32, seed=4)
        composite_cfg = cfg.with_overrides({'dir_on_composite': True})
        ctx = build_loss_context(content, torch.zeros(1, 1, 32, 32), PARSED, composite_cfg, backend)

        terms, _, _ = loss_terms(stylized, ctx, torch.Generator().manual_seed(0))

        assert terms['dir'].item() == 1.0

    def test_invalid_stylized(self, backend, cfg):
        """Test out-of-range stylized images are rejected."""
        content = get_halves_scenario(32)

        with pytest.raises(InvalidInputError):
            total_loss(content * 3, content, torch.ones(1, 1, 32, 32), PARSED, cfg, backend, torch.Generator())

    @pytest.mark.parametrize("weight", ['lambda_d', 'lambda_p', 'lambda_c', 'lambda_tv', 'lambda_m'])
    @pytest.mark.parametrize("factor", [0.0, 0.5, 2.0])
    def test_weight_scales_its_contribution(self, backend, cfg, weight, factor):
        """Test scaling one weight scales only that term's share of the total."""
        content = get_halves_scenario(32, dtype=torch.float64)
        stylized = get_noise_scenario(32, seed=5, low=0.2, high=0.8, dtype=torch.float64)
        mask = render_shape(left_half(), 32, 32, dtype=torch.float64)
        scaled_cfg = cfg.with_overrides({weight: getattr(cfg, weight) * factor})
        term = {'lambda_d': 'dir', 'lambda_p': 'patch', 'lambda_c': 'content',
                'lambda_tv': 'tv', 'lambda_m': 'mask'}[weight]

        base = total_loss(stylized, content, mask, PARSED, cfg, backend, torch.Generator().manual_seed(1))
        scaled = total_loss(stylized, content, mask, PARSED, scaled_cfg, backend,
                            torch.Generator().manual_seed(1))

        share = getattr(base, term) * getattr(cfg, weight)
        if weight == 'lambda_m':
            share *= cfg.threshold
        assert getattr(scaled, term) == getattr(base, term)
        assert scaled.total - base.total == pytest.approx((factor - 1.0) * share, rel=1e-9, abs=1e-9)

    def test_all_weights_zero(self, backend, cfg):
        """Test zero weights give a zero total while every term is still reported."""
        zero_cfg = cfg.with_overrides({name: 0.0 for name in
                                       ('lambda_d', 'lambda_p', 'lambda_c', 'lambda_tv', 'lambda_m')})
        content = get_halves_scenario(32)
        stylized = get_noise_scenario(32, seed=6, low=0.2, high=0.8)

        breakdown = total_loss(stylized, content, torch.zeros(1, 1, 32, 32), PARSED, zero_cfg, backend,
                               torch.Generator().manual_seed(0))

        assert breakdown.total == 0.0
        assert 0.0 <= breakdown.dir <= 2.0
        assert breakdown.content > 0.0
        assert breakdown.tv > 0.0
        assert breakdown.mask > 0.0

    def test_mask_term_weighted_by_threshold(self, backend, cfg):
        """Test lambda_m 1 at threshold 0.7 with mask loss 0.125 adds 0.0875."""
        mask_only = cfg.with_overrides({'lambda_d': 0.0, 'lambda_p': 0.0, 'lambda_c': 0.0,
                                        'lambda_tv': 0.0, 'lambda_m': 1.0, 'threshold': 0.7})
        content = torch.zeros(1, 3, 32, 32, dtype=torch.float64)
        stylized = torch.full((1, 3, 32, 32), 0.5, dtype=torch.float64)
        mask = render_shape(left_half(), 32, 32, dtype=torch.float64)

        breakdown = total_loss(stylized, content, mask, PARSED, mask_only, backend,
                               torch.Generator().manual_seed(0))

        assert breakdown.mask == pytest.approx(0.125, abs=1e-12)
        assert breakdown.total == pytest.approx(0.0875, abs=1e-12)
