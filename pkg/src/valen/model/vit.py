"""Patch-based panel encoder with parallel viewpoint projection heads."""

from __future__ import annotations

import torch
import torch.nn as nn


def _encoder(dim: int, heads: int, depth: int) -> nn.TransformerEncoder:
    layer = nn.TransformerEncoderLayer(
        d_model=dim,
        nhead=heads,
        dim_feedforward=2 * dim,
        dropout=0.0,
        batch_first=True,
        norm_first=True,
    )
    return nn.TransformerEncoder(layer, num_layers=depth, enable_nested_tensor=False)


class PanelEncoder(nn.Module):
    """Panel -> multi-viewpoint representation [V, D].

    A small ViT trunk over 4x4 patches; V parallel linear heads on the
    pooled token emit the viewpoint representations.
    """

    def __init__(self, dim: int = 64, n_views: int = 4, depth: int = 3, heads: int = 4,
                 panel_size: int = 32, patch_size: int = 4):
        super().__init__()
        if panel_size % patch_size != 0:
            raise ValueError("panel_size must be divisible by patch_size")
        self.dim = dim
        self.n_views = n_views
        self.panel_size = panel_size
        self.patch_size = patch_size
        n_patches = (panel_size // patch_size) ** 2
        self.patch_embed = nn.Linear(patch_size * patch_size, dim)
        self.pos_embed = nn.Parameter(torch.randn(1, n_patches, dim) * 0.02)
        self.trunk = _encoder(dim, heads, depth)
        self.view_heads = nn.Linear(dim, n_views * dim)

    def patchify(self, panels: torch.Tensor) -> torch.Tensor:
        """[B, H, W] -> [B, n_patches, patch_size**2], row-major patches."""
        b, h, w = panels.shape
        p = self.patch_size
        if h != self.panel_size or w != self.panel_size:
            raise ValueError(f"panel shape {(h, w)} != {(self.panel_size, self.panel_size)}")
        x = panels.reshape(b, h // p, p, w // p, p)
        return x.permute(0, 1, 3, 2, 4).reshape(b, (h // p) * (w // p), p * p)

    def forward(self, panels: torch.Tensor) -> torch.Tensor:
        """[B, H, W] -> [B, V, D]."""
        tokens = self.patch_embed(self.patchify(panels)) + self.pos_embed
        pooled = self.trunk(tokens).mean(dim=1)
        return self.view_heads(pooled).reshape(-1, self.n_views, self.dim)
