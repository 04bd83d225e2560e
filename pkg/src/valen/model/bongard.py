"""Solver adaptation for transformed Bongard instances.

Differences from the RPM core: a residual convolutional backbone feeds the
viewpoint encoder (few-shot friendly), pattern extraction drops the
row/column MLP and attends directly over the panel representations with
M = 6 learned queries, and evaluation ranks the two test panels.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import DataError
from .core import ConsistencyAnalyzer
from .vit import _encoder

N_BONGARD_CELLS = 7  # 6 statement panels + the candidate slot


class _ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.GroupNorm(4, channels),
            nn.GELU(),
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.GroupNorm(4, channels),
        )
        self.act = nn.GELU()

    def forward(self, x):
        return self.act(x + self.body(x))


class BongardPanelEncoder(nn.Module):
    """Residual conv backbone -> 8x8 feature map -> tokens -> encoder -> [V, D]."""

    def __init__(self, dim: int = 64, n_views: int = 4, heads: int = 4, depth: int = 2):
        super().__init__()
        self.dim = dim
        self.n_views = n_views
        self.backbone = nn.Sequential(
            nn.Conv2d(1, dim // 2, 3, stride=2, padding=1),  # 32 -> 16
            nn.GELU(),
            _ResidualBlock(dim // 2),
            nn.Conv2d(dim // 2, dim, 3, stride=2, padding=1),  # 16 -> 8
            nn.GELU(),
            _ResidualBlock(dim),
            _ResidualBlock(dim),
            _ResidualBlock(dim),
        )
        self.token_pos = nn.Parameter(torch.randn(1, 64, dim) * 0.02)
        self.encoder = _encoder(dim, heads, depth)
        self.view_heads = nn.Linear(dim, n_views * dim)

    def forward(self, panels: torch.Tensor) -> torch.Tensor:
        """[B, H, W] -> [B, V, D]."""
        fmap = self.backbone(panels.unsqueeze(1))  # [B, D, 8, 8]
        tokens = fmap.flatten(2).transpose(1, 2) + self.token_pos
        pooled = self.encoder(tokens).mean(dim=1)
        return self.view_heads(pooled).reshape(-1, self.n_views, self.dim)


class ClusterPatternExtractor(nn.Module):
    """Context of panel reps -> M cluster patterns; order-free.

    No row/column MLP: the representations enter the Transformer-Encoder
    directly as tokens together with M learned query slots, and no
    positional encoding is applied, so the output is invariant to context
    permutation at fixed weights.
    """

    def __init__(self, dim: int = 64, n_patterns: int = 6, heads: int = 4, depth: int = 2):
        super().__init__()
        self.n_patterns = n_patterns
        self.queries = nn.Parameter(torch.randn(n_patterns, dim) * 0.02)
        self.encoder = _encoder(dim, heads, depth)

    def forward(self, contexts: torch.Tensor) -> torch.Tensor:
        """[B, K, D] -> [B, M, D]; K may be 6 or 7."""
        if contexts.shape[1] == 0:
            raise DataError("empty pattern-extraction context")
        b = contexts.shape[0]
        seq = torch.cat([contexts, self.queries.expand(b, -1, -1)], dim=1)
        return self.encoder(seq)[:, -self.n_patterns:, :]


class BongardValenModel(nn.Module):
    """Solver for transformed Bongard instances (statement 6, pool 8)."""

    def __init__(self, dim: int = 64, n_views: int = 4, n_patterns: int = 6,
                 heads: int = 4, encoder_depth: int = 2, extractor_depth: int = 2,
                 analyzer_depth: int = 2):
        super().__init__()
        self.dim = dim
        self.n_views = n_views
        self.n_patterns = n_patterns
        self.encoder = BongardPanelEncoder(dim, n_views, heads, encoder_depth)
        self.extractor = ClusterPatternExtractor(dim, n_patterns, heads, extractor_depth)
        self.analyzer = ConsistencyAnalyzer(dim, heads, analyzer_depth)

    def encode_panels(self, panels: torch.Tensor) -> torch.Tensor:
        lead = panels.shape[:-2]
        reps = self.encoder(panels.reshape(-1, *panels.shape[-2:]))
        return reps.reshape(*lead, self.n_views, self.dim)

    def extract_pattern_set(self, reps: torch.Tensor) -> torch.Tensor:
        """reps [B, 7, V, D] -> PatternSet [B, V, 7, M, D]."""
        b, k, v, d = reps.shape
        keep = torch.tensor(
            [[i for i in range(k) if i != n] for n in range(k)], device=reps.device
        )
        contexts = reps[:, keep].permute(0, 3, 1, 2, 4)  # [B, V, 7, 6, D]
        flat = contexts.reshape(b * v * k, k - 1, d)
        return self.extractor(flat).reshape(b, v, k, self.n_patterns, d)

    def score_matrix_reps(self, reps: torch.Tensor) -> torch.Tensor:
        """Completed 7-cell matrix reps [B, 7, V, D] -> score [B]."""
        patterns = self.extract_pattern_set(reps)
        b, v, k, m, d = patterns.shape
        queries = patterns[:, :, k - 1].reshape(b * v, m, d)
        memory = patterns[:, :, : k - 1].reshape(b * v, (k - 1) * m, d)
        return self.analyzer(queries, memory).reshape(b, v).mean(dim=1)

    def score_candidates(self, statement_reps: torch.Tensor, candidate_reps: torch.Tensor) -> torch.Tensor:
        b, c = candidate_reps.shape[:2]
        full = torch.cat(
            [statement_reps.unsqueeze(1).expand(-1, c, -1, -1, -1), candidate_reps.unsqueeze(2)],
            dim=2,
        )
        flat = full.reshape(b * c, N_BONGARD_CELLS, self.n_views, self.dim)
        return self.score_matrix_reps(flat).reshape(b, c)

    def forward(self, statement: torch.Tensor, pool: torch.Tensor) -> torch.Tensor:
        """statement [B, 6, H, W], pool [B, C, H, W] -> scores [B, C]."""
        if statement.shape[1] != 6:
            raise DataError(f"transformed statement must hold 6 panels, got {statement.shape[1]}")
        return self.score_candidates(self.encode_panels(statement), self.encode_panels(pool))


def evaluate_test_pair(model: BongardValenModel, instance, device: str = "cpu") -> bool:
    """Correct iff the primary test panel outscores the auxiliary test panel.

    Ties count as incorrect (strict inequality).
    """
    if instance.aux_test_index is None:
        raise DataError("instance does not record the auxiliary test index")
    if instance.pool.shape[0] != 8:
        raise DataError(f"pool must hold 8 panels, got {instance.pool.shape[0]}")
    dtype = next(model.parameters()).dtype
    statement = torch.as_tensor(instance.statement, dtype=dtype, device=device).unsqueeze(0)
    tests = torch.as_tensor(
        instance.pool[[instance.answer_index, instance.aux_test_index]],
        dtype=dtype, device=device,
    ).unsqueeze(0)
    scores = model(statement, tests)[0]
    return bool(scores[0] > scores[1])
