"""The solver core for mini-RPM.

Pipeline per candidate: encode the 9 panels into multi-viewpoint
representations, enumerate the 9 incomplete matrices, extract M
progressive-pattern vectors per incomplete matrix, then let the
consistency analyzer score the option (queries from the option-missing
context, key-values from the other 8 contexts; M scalars summed per
viewpoint, averaged over viewpoints).
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import DataError
from .vit import PanelEncoder, _encoder

N_CELLS = 9
OPTION_SLOT = 8  # 0-based index of the option cell in the 3x3 layout


def enumerate_incomplete(reps: torch.Tensor) -> torch.Tensor:
    """All incomplete representation matrices.

    reps: [..., 9, V, D] -> contexts [..., 9, 8, V, D], where context n is
    reps with index n removed and order preserved. Context 8 is the
    option-missing matrix.
    """
    if reps.shape[-3] != N_CELLS:
        raise DataError(f"expected {N_CELLS} representations, got {reps.shape[-3]}")
    keep = torch.tensor(
        [[i for i in range(N_CELLS) if i != n] for n in range(N_CELLS)],
        device=reps.device,
    )
    return reps[..., keep, :, :]


def _context_groups() -> tuple[torch.Tensor, torch.Tensor]:
    """Row/column groups of each incomplete matrix, in context coordinates.

    Removing cell n kills its row and column; the remaining 2 rows and 2
    columns are 4 complete groups that together cover all 8 present cells.
    Returns (cells [9, 4, 3], group ids [9, 4]) where ids index the 6
    possible groups (3 rows then 3 columns).
    """
    cells, ids = [], []
    for n in range(N_CELLS):
        groups, gids = [], []
        for r in range(3):
            if r != n // 3:
                groups.append([3 * r + c for c in range(3)])
                gids.append(r)
        for c in range(3):
            if c != n % 3:
                groups.append([c + 3 * r for r in range(3)])
                gids.append(3 + c)
        # shift to context coordinates (cells above n slide down by one)
        groups = [[i - (i > n) for i in g] for g in groups]
        cells.append(groups)
        ids.append(gids)
    return torch.tensor(cells), torch.tensor(ids)


class PatternExtractor(nn.Module):
    """Incomplete matrix (8 reps, one viewpoint) -> M progressive patterns.

    An MLP maps each of the 4 complete row/column groups to one
    progressive-information vector; a Transformer-Encoder over these 4
    vectors followed by a linear 4-to-M token mapping yields the M pattern
    vectors (four-to-M asymmetric sequence mapping). Reading the encoded
    group tokens directly (rather than appended query tokens) keeps the
    patterns first-order in the context content, which matters for
    trainability at small scale.
    """

    def __init__(self, dim: int = 64, n_patterns: int = 2, heads: int = 4, depth: int = 2):
        super().__init__()
        self.dim = dim
        self.n_patterns = n_patterns
        self.group_mlp = nn.Sequential(
            nn.Linear(3 * dim, 2 * dim), nn.GELU(), nn.Linear(2 * dim, dim)
        )
        self.group_embed = nn.Embedding(6, dim)
        self.to_patterns = nn.Linear(4 * dim, n_patterns * dim)
        self.encoder = _encoder(dim, heads, depth)
        cells, ids = _context_groups()
        self.register_buffer("group_cells", cells, persistent=False)
        self.register_buffer("group_ids", ids, persistent=False)

    def forward(self, contexts: torch.Tensor, missing: torch.Tensor) -> torch.Tensor:
        """contexts: [B, 8, D]; missing: [B] cell index absent from each context.

        Returns patterns [B, M, D].
        """
        if contexts.shape[-2] != N_CELLS - 1:
            raise DataError(f"context length {contexts.shape[-2]} != {N_CELLS - 1}")
        b = contexts.shape[0]
        cells = self.group_cells[missing].reshape(b, 12, 1).expand(-1, -1, self.dim)
        grouped = torch.gather(contexts, 1, cells).reshape(b, 4, 3 * self.dim)
        info = self.group_mlp(grouped) + self.group_embed(self.group_ids[missing])
        encoded = self.encoder(info).reshape(b, 4 * self.dim)
        return self.to_patterns(encoded).reshape(b, self.n_patterns, self.dim)


class ConsistencyAnalyzer(nn.Module):
    """Score pattern consistency for one viewpoint.

    Transformer-Decoder with the option-missing patterns as queries and
    the other contexts' patterns as key-value pairs (no order positional
    encoding, so key-value permutation leaves the score unchanged); each
    output is mapped to a scalar and the M scalars are summed.
    """

    def __init__(self, dim: int = 64, heads: int = 4, depth: int = 2):
        super().__init__()
        layer = nn.TransformerDecoderLayer(
            d_model=dim,
            nhead=heads,
            dim_feedforward=2 * dim,
            dropout=0.0,
            batch_first=True,
            norm_first=True,
        )
        self.decoder = nn.TransformerDecoder(layer, num_layers=depth)
        self.score_mlp = nn.Sequential(nn.Linear(dim, dim), nn.GELU(), nn.Linear(dim, 1))

    def forward(self, queries: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        """queries [B, M, D], memory [B, K, D] -> summed score [B]."""
        out = self.decoder(queries, memory)
        return self.score_mlp(out).squeeze(-1).sum(dim=-1)


class ValenModel(nn.Module):
    """Full solver: encoder + pattern extractor + consistency analyzer."""

    def __init__(self, dim: int = 64, n_views: int = 4, n_patterns: int = 2,
                 encoder_depth: int = 3, extractor_depth: int = 2,
                 analyzer_depth: int = 2, heads: int = 4, panel_size: int = 32):
        super().__init__()
        self.dim = dim
        self.n_views = n_views
        self.n_patterns = n_patterns
        self.heads = heads
        self.extractor_depth = extractor_depth
        self.analyzer_depth = analyzer_depth
        self.encoder = PanelEncoder(dim, n_views, encoder_depth, heads, panel_size)
        self.extractor = PatternExtractor(dim, n_patterns, heads, extractor_depth)
        self.analyzer = ConsistencyAnalyzer(dim, heads, analyzer_depth)

    def encode_panels(self, panels: torch.Tensor) -> torch.Tensor:
        """[..., H, W] -> [..., V, D]."""
        lead = panels.shape[:-2]
        reps = self.encoder(panels.reshape(-1, *panels.shape[-2:]))
        return reps.reshape(*lead, self.n_views, self.dim)

    def extract_pattern_set(self, reps: torch.Tensor) -> torch.Tensor:
        """reps [B, 9, V, D] -> PatternSet [B, V, 9, M, D]."""
        b, _, v, d = reps.shape
        contexts = enumerate_incomplete(reps)  # [B, 9, 8, V, D]
        contexts = contexts.permute(0, 3, 1, 2, 4)  # [B, V, 9, 8, D]
        flat = contexts.reshape(b * v * N_CELLS, N_CELLS - 1, d)
        missing = torch.arange(N_CELLS, device=reps.device).repeat(b * v)
        patterns = self.extractor(flat, missing)
        return patterns.reshape(b, v, N_CELLS, self.n_patterns, d)

    def consistency_from_patterns(self, patterns: torch.Tensor) -> torch.Tensor:
        """PatternSet [B, V, 9, M, D] -> score [B] (mean over viewpoints)."""
        b, v, _, m, d = patterns.shape
        queries = patterns[:, :, OPTION_SLOT].reshape(b * v, m, d)
        memory = patterns[:, :, :OPTION_SLOT].reshape(b * v, OPTION_SLOT * m, d)
        per_view = self.analyzer(queries, memory).reshape(b, v)
        return per_view.mean(dim=1)

    def score_matrix_reps(self, reps: torch.Tensor) -> torch.Tensor:
        """Completed matrix representations [B, 9, V, D] -> score [B]."""
        return self.consistency_from_patterns(self.extract_pattern_set(reps))

    def score_candidates(self, statement_reps: torch.Tensor, candidate_reps: torch.Tensor) -> torch.Tensor:
        """statement_reps [B, 8, V, D], candidate_reps [B, C, V, D] -> scores [B, C]."""
        b, c = candidate_reps.shape[:2]
        full = torch.cat(
            [statement_reps.unsqueeze(1).expand(-1, c, -1, -1, -1), candidate_reps.unsqueeze(2)],
            dim=2,
        )  # [B, C, 9, V, D]
        return self.score_matrix_reps(full.reshape(b * c, N_CELLS, self.n_views, self.dim)).reshape(b, c)

    def forward(self, statement: torch.Tensor, pool: torch.Tensor) -> torch.Tensor:
        """statement [B, 8, H, W], pool [B, C, H, W] -> scores [B, C]."""
        if statement.shape[1] != 8:
            raise DataError(f"statement must hold 8 panels, got {statement.shape[1]}")
        return self.score_candidates(self.encode_panels(statement), self.encode_panels(pool))


def option_loss(scores: torch.Tensor, answer_index: torch.Tensor | int) -> torch.Tensor:
    """Cross-entropy of softmax(scores) against the answer position.

    scores: [C] or [B, C].
    """
    if scores.dim() == 1:
        scores = scores.unsqueeze(0)
    if not isinstance(answer_index, torch.Tensor):
        answer_index = torch.tensor([answer_index], device=scores.device)
    if answer_index.min() < 0 or answer_index.max() >= scores.shape[1]:
        raise DataError(f"answer_index out of range for {scores.shape[1]} options")
    return F.cross_entropy(scores, answer_index)


def score_instance(model: ValenModel, instance, device: str = "cpu") -> torch.Tensor:
    """Score every pool candidate of one RPM instance -> [8] scores."""
    if instance.pool.shape[0] != 8:
        raise DataError(f"pool must hold 8 panels, got {instance.pool.shape[0]}")
    dtype = next(model.parameters()).dtype
    statement = torch.as_tensor(instance.statement, dtype=dtype, device=device).unsqueeze(0)
    pool = torch.as_tensor(instance.pool, dtype=dtype, device=device).unsqueeze(0)
    return model(statement, pool)[0]
