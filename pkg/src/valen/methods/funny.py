"""Planning the sample-representation distribution as a Gaussian mixture.

Panels are encoded into a (center, bias) pair; reasoning runs on
center + fresh standard-normal noise, the bias is regressed onto a
resampled standard-normal target, and a half-split decoder with
range-restricted activations reconstructs the panel from both
center + bias and center + noise. For Bongard data the method degenerates
to exact-pixel-permutation augmentation.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError, DataError
from ..model.core import ValenModel
from ..model.vit import PanelEncoder, _encoder

ABLATIONS = ("full", "f1", "f2", "f3")


class CenterBiasEncoder(nn.Module):
    """Shared trunk with two parallel head sets: center (key attributes)
    and bias (non-key residual). Downstream representation r = center + bias."""

    def __init__(self, dim: int = 64, n_views: int = 4, depth: int = 3, heads: int = 4,
                 panel_size: int = 32):
        super().__init__()
        self.dim = dim
        self.n_views = n_views
        self.trunk = PanelEncoder(dim, n_views, depth, heads, panel_size)
        self.bias_heads = nn.Linear(dim, n_views * dim)

    def forward(self, panels: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """[..., H, W] -> (center [..., V, D], bias [..., V, D])."""
        lead = panels.shape[:-2]
        flat = panels.reshape(-1, *panels.shape[-2:])
        tokens = self.trunk.patch_embed(self.trunk.patchify(flat)) + self.trunk.pos_embed
        pooled = self.trunk.trunk(tokens).mean(dim=1)
        center = self.trunk.view_heads(pooled).reshape(*lead, self.n_views, self.dim)
        bias = self.bias_heads(pooled).reshape(*lead, self.n_views, self.dim)
        return center, bias


class _DecoderStack(nn.Module):
    """Inverted encoder: viewpoint vectors in, panel logits out."""

    def __init__(self, dim: int, n_views: int, heads: int, depth: int, panel_size: int,
                 patch_size: int = 4):
        super().__init__()
        self.panel_size = panel_size
        self.patch_size = patch_size
        n_patches = (panel_size // patch_size) ** 2
        self.patch_queries = nn.Parameter(torch.randn(n_patches, dim) * 0.02)
        self.encoder = _encoder(dim, heads, depth)
        self.to_pixels = nn.Linear(dim, patch_size * patch_size)

    def forward(self, r: torch.Tensor) -> torch.Tensor:
        """r [B, V, D] -> panel logits [B, H, W]."""
        b = r.shape[0]
        n_patches = self.patch_queries.shape[0]
        seq = torch.cat([r, self.patch_queries.expand(b, -1, -1)], dim=1)
        patches = self.to_pixels(self.encoder(seq)[:, -n_patches:, :])
        g = self.panel_size // self.patch_size
        p = self.patch_size
        return patches.reshape(b, g, g, p, p).permute(0, 1, 3, 2, 4).reshape(
            b, self.panel_size, self.panel_size
        )


def upper_activation(xu: torch.Tensor) -> torch.Tensor:
    """(sigmoid + 1) / 2, range (0.5, 1)."""
    return (torch.sigmoid(xu) + 1.0) / 2.0


def lower_activation(xd: torch.Tensor) -> torch.Tensor:
    """sigmoid / 2, range (0, 0.5)."""
    return torch.sigmoid(xd) / 2.0


class HalfSplitDecoder(nn.Module):
    """Two structurally identical, independently parameterized stacks whose
    outputs pass through range-restricted activations (0.5, 1) and (0, 0.5).

    Because neither branch can reach the target pixels on its own side of
    0.5, the reconstruction loss has a strictly positive floor on any
    non-constant-0.5 image.
    """

    def __init__(self, dim: int = 64, n_views: int = 4, heads: int = 4, depth: int = 2,
                 panel_size: int = 32):
        super().__init__()
        self.upper = _DecoderStack(dim, n_views, heads, depth, panel_size)
        self.lower = _DecoderStack(dim, n_views, heads, depth, panel_size)

    def forward(self, r: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """r [B, V, D] -> (xu_act in (0.5, 1), xd_act in (0, 0.5)), panel shaped."""
        return upper_activation(self.upper(r)), lower_activation(self.lower(r))


class NormalDecoder(nn.Module):
    """Ablation decoder: a single stack with a plain sigmoid."""

    def __init__(self, dim: int = 64, n_views: int = 4, heads: int = 4, depth: int = 2,
                 panel_size: int = 32):
        super().__init__()
        self.stack = _DecoderStack(dim, n_views, heads, depth, panel_size)

    def forward(self, r: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        out = torch.sigmoid(self.stack(r))
        return out, out


def funny_loss(xu_act: torch.Tensor, xd_act: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    """MSE(xu_act, x) + MSE(xd_act, x)."""
    if xu_act.shape != x.shape or xd_act.shape != x.shape:
        raise DataError("decoder output / target shape mismatch")
    return F.mse_loss(xu_act, x) + F.mse_loss(xd_act, x)


def funny_loss_floor(x: torch.Tensor) -> torch.Tensor:
    """Per-pixel infimum of funny_loss over all decoder outputs: mean((x - 0.5)^2)."""
    return ((x - 0.5) ** 2).mean()


def bias_regression_loss(bias: torch.Tensor, fresh_noise: torch.Tensor) -> torch.Tensor:
    """MSE between the bias and a freshly resampled standard-normal target.

    The target must not be the noise already superimposed on the centers
    for the reasoning path (provenance-tagged draws enforce this).
    """
    if getattr(fresh_noise, "provenance", None) == "reasoning":
        raise ValueError("bias regression target must be a fresh draw, not the reasoning-path noise")
    if bias.shape != fresh_noise.shape:
        raise DataError("bias / noise shape mismatch")
    return F.mse_loss(bias, fresh_noise)


def draw_noise(shape, provenance: str, generator: torch.Generator | None = None,
               dtype=torch.float32, device="cpu") -> torch.Tensor:
    """Standard-normal draw carrying a provenance tag."""
    noise = torch.randn(shape, generator=generator, dtype=dtype, device=device)
    noise.provenance = provenance
    return noise


class FunnyModules(nn.Module):
    """The method's learnable parts: center/bias extractor plus decoder."""

    def __init__(self, dim: int = 64, n_views: int = 4, encoder_depth: int = 3,
                 decoder_depth: int = 2, heads: int = 4, panel_size: int = 32,
                 decoder: str = "half-split"):
        super().__init__()
        if decoder not in ("half-split", "normal"):
            raise ConfigError(f"unknown decoder variant: {decoder!r}")
        self.decoder_kind = decoder
        self.encoder = CenterBiasEncoder(dim, n_views, encoder_depth, heads, panel_size)
        cls = HalfSplitDecoder if decoder == "half-split" else NormalDecoder
        self.decoder = cls(dim, n_views, heads, decoder_depth, panel_size)


def funny_training_step(statement: torch.Tensor, pool: torch.Tensor, answer: torch.Tensor,
                        valen: ValenModel, funny: FunnyModules, ablation: str = "full",
                        generator: torch.Generator | None = None) -> dict:
    """Per-term losses of one step (unit weights; caller sums and backprops).

    Terms: "reasoning" (CE on center + fresh noise through the solver),
    "green" (bias onto resampled noise), "red" (reconstruct x from
    center + bias), "yellow" (reconstruct x from center + noise).
    Ablations: f1 = reasoning only; f2 = reasoning + green + yellow;
    f3 = reasoning + green + red.
    """
    if ablation not in ABLATIONS:
        raise ConfigError(f"unknown ablation: {ablation!r}; expected one of {ABLATIONS}")
    b = statement.shape[0]
    panels = torch.cat([statement, pool], dim=1)  # [B, 16, H, W]
    center, bias = funny.encoder(panels)
    dtype, device = center.dtype, center.device

    eps_reason = draw_noise(center.shape, "reasoning", generator, dtype, device)
    reason_reps = center + eps_reason
    scores = valen.score_candidates(reason_reps[:, :8], reason_reps[:, 8:])
    losses = {"reasoning": F.cross_entropy(scores, answer)}

    # the completed matrix x_1..x_9: statement plus the correct option
    answer_panel = pool[torch.arange(b), answer].unsqueeze(1)
    matrix = torch.cat([statement, answer_panel], dim=1)  # [B, 9, H, W]
    m_center = torch.cat([center[:, :8], center[torch.arange(b), 8 + answer].unsqueeze(1)], dim=1)
    m_bias = torch.cat([bias[:, :8], bias[torch.arange(b), 8 + answer].unsqueeze(1)], dim=1)
    m_eps = torch.cat([eps_reason[:, :8], eps_reason[torch.arange(b), 8 + answer].unsqueeze(1)], dim=1)
    flat_x = matrix.reshape(b * 9, *matrix.shape[-2:])

    if ablation in ("full", "f2", "f3"):
        eps_target = draw_noise(m_bias.shape, "bias-regression", generator, dtype, device)
        losses["green"] = bias_regression_loss(m_bias, eps_target)
    if ablation in ("full", "f3"):
        xu, xd = funny.decoder((m_center + m_bias).reshape(b * 9, *m_center.shape[-2:]))
        losses["red"] = funny_loss(xu, xd, flat_x)
    if ablation in ("full", "f2"):
        xu, xd = funny.decoder((m_center + m_eps).reshape(b * 9, *m_center.shape[-2:]))
        losses["yellow"] = funny_loss(xu, xd, flat_x)
    return losses


_AUGMENTATIONS = (
    lambda p: p,
    lambda p: np.fliplr(p),
    lambda p: np.flipud(p),
    lambda p: np.rot90(p, 1),
    lambda p: np.rot90(p, 2),
    lambda p: np.rot90(p, 3),
)


def bongard_augment(panel: np.ndarray, draw: int | np.random.Generator, kind: str = "bongard") -> np.ndarray:
    """Apply one of {identity, h-flip, v-flip, rot90, rot180, rot270}.

    Exact pixel permutation, no interpolation. Only valid for Bongard data:
    these maps can break key attributes of RPM matrices.
    """
    if kind != "bongard":
        raise ConfigError("bongard_augment is only applicable to bongard-kind data")
    if isinstance(draw, np.random.Generator):
        draw = int(draw.integers(len(_AUGMENTATIONS)))
    if not 0 <= draw < len(_AUGMENTATIONS):
        raise ValueError(f"augmentation draw out of range: {draw}")
    return np.ascontiguousarray(_AUGMENTATIONS[draw](panel))
