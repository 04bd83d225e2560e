"""Metadata-supervised Gaussian-mixture planning of pattern representations.

The dataset's metadata vocabulary is encoded into S (mean, log-variance)
pairs, reparameterized T times into prototypes, and the viewpoint-averaged
pattern representations are assigned to mixture components by a
temperature-scaled cosine-similarity cross-entropy.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import DataError
from ..model.core import ValenModel
from ..model.vit import _encoder
from .tine import reparameterize


class MetadataEncoder(nn.Module):
    """Encode each (attribute, rule) vocabulary entry into a 2D-width vector.

    Entries are symbolic "attribute:rule" tokens; attribute and rule get
    learned embeddings, a small Transformer-Encoder mixes the two-token
    sequence, and a linear head emits mean-half / log-variance-half.
    """

    def __init__(self, vocabulary: list[str], dim: int = 64, heads: int = 4, depth: int = 1):
        super().__init__()
        if not vocabulary:
            raise DataError("metadata vocabulary is empty")
        self.vocabulary = list(vocabulary)
        self.dim = dim
        pairs = [tuple(entry.split(":")) for entry in self.vocabulary]
        if any(len(p) != 2 for p in pairs):
            raise DataError("vocabulary entries must be 'attribute:rule' tokens")
        self.attr_names = sorted({a for a, _ in pairs})
        self.rule_names = sorted({r for _, r in pairs})
        self.attr_embed = nn.Embedding(len(self.attr_names), dim)
        self.rule_embed = nn.Embedding(len(self.rule_names), dim)
        self.encoder = _encoder(dim, heads, depth)
        self.head = nn.Linear(dim, 2 * dim)
        attr_idx = torch.tensor([self.attr_names.index(a) for a, _ in pairs])
        rule_idx = torch.tensor([self.rule_names.index(r) for _, r in pairs])
        self.register_buffer("attr_idx", attr_idx, persistent=False)
        self.register_buffer("rule_idx", rule_idx, persistent=False)

    def forward(self, entries: list[str] | None = None) -> torch.Tensor:
        """Encode entries (default: whole vocabulary) -> q [S, 2D]."""
        if entries is None:
            attr_idx, rule_idx = self.attr_idx, self.rule_idx
        else:
            for e in entries:
                if e not in self.vocabulary:
                    raise DataError(f"metadata entry outside vocabulary: {e!r}")
            pos = [self.vocabulary.index(e) for e in entries]
            attr_idx, rule_idx = self.attr_idx[pos], self.rule_idx[pos]
        tokens = torch.stack([self.attr_embed(attr_idx), self.rule_embed(rule_idx)], dim=1)
        return self.head(self.encoder(tokens).mean(dim=1))


def build_prototypes(q: torch.Tensor, noise: torch.Tensor | None = None,
                     n_draws: int = 10, generator: torch.Generator | None = None) -> torch.Tensor:
    """Reparameterize each component T times: q [S, 2D] -> Q [S, T, D]."""
    s, twod = q.shape
    d = twod // 2
    mean, log_var = q[:, :d], q[:, d:]
    if noise is None:
        noise = torch.randn(s, n_draws, d, generator=generator, dtype=q.dtype, device=q.device)
    t = noise.shape[1]
    return reparameterize(
        mean.unsqueeze(1).expand(s, t, d), log_var.unsqueeze(1).expand(s, t, d), noise
    )


def viewpoint_average(patterns: torch.Tensor) -> torch.Tensor:
    """PatternSet [..., V, 9, M, D] -> mean over the viewpoint axis [..., 9, M, D]."""
    return patterns.mean(dim=-4)


def _assignment_log_probs(p_bar: torch.Tensor, prototypes: torch.Tensor, tau: torch.Tensor) -> torch.Tensor:
    """log softmax-over-S of cosine(p_bar, Q) / tau.

    p_bar [..., 9, M, D], prototypes [S, T, D] -> [..., 9, M, S, T].
    """
    p_hat = F.normalize(p_bar, dim=-1)
    q_hat = F.normalize(prototypes, dim=-1)
    logits = torch.einsum("...nmd,std->...nmst", p_hat, q_hat) / tau
    return F.log_softmax(logits, dim=-2)


def sbr_loss(p_bar: torch.Tensor, prototypes: torch.Tensor, meta: torch.Tensor,
             tau: torch.Tensor) -> torch.Tensor:
    """Assignment loss: -sum_m sum_s~ sum_n sum_t meta[m, s~] * log p(s~ | n, m, t).

    p_bar [9, M, D] or [B, 9, M, D]; meta one-hot [M, S] or [B, M, S];
    batched inputs are averaged over the batch.
    """
    row_sums = meta.sum(dim=-1)
    if not (torch.all(row_sums == 1) and torch.all((meta == 0) | (meta == 1))):
        raise DataError("meta rows must be one-hot over the vocabulary")
    log_probs = _assignment_log_probs(p_bar, prototypes, tau)  # [..., 9, M, S, T]
    per = -torch.einsum("...nmst,...ms->...", log_probs, meta.to(log_probs.dtype))
    return per.mean()


def interpret_patterns(p_bar: torch.Tensor, prototypes: torch.Tensor, tau: torch.Tensor) -> torch.Tensor:
    """Predicted component per pattern slot: argmax_s of the mean assignment
    probability over contexts and prototype draws. [..., 9, M, D] -> [..., M]."""
    probs = _assignment_log_probs(p_bar, prototypes, tau).exp()
    return probs.mean(dim=(-4, -1)).argmax(dim=-1)


class SbrHead(nn.Module):
    """Learnable parts of the method: metadata encoder and temperature.

    tau is stored as exp(log_tau) so positivity holds throughout training;
    initialized to 0.1.
    """

    def __init__(self, vocabulary: list[str], dim: int = 64, n_draws: int = 10,
                 heads: int = 4, depth: int = 1, tau_init: float = 0.1):
        super().__init__()
        self.n_draws = n_draws
        self.metadata_encoder = MetadataEncoder(vocabulary, dim, heads, depth)
        self.log_tau = nn.Parameter(torch.tensor(math.log(tau_init)))

    @property
    def tau(self) -> torch.Tensor:
        return self.log_tau.exp()

    def prototypes(self, noise: torch.Tensor | None = None,
                   generator: torch.Generator | None = None) -> torch.Tensor:
        return build_prototypes(self.metadata_encoder(), noise, self.n_draws, generator)

    def loss(self, patterns: torch.Tensor, meta: torch.Tensor,
             generator: torch.Generator | None = None) -> torch.Tensor:
        """patterns: PatternSet [..., V, 9, M, D]; meta one-hot [..., M, S]."""
        return sbr_loss(viewpoint_average(patterns), self.prototypes(generator=generator),
                        meta, self.tau)


def pretrain_reinit(model: ValenModel, seed: int) -> None:
    """Reinitialize the pattern extractor and consistency analyzer in place,
    keeping the representation extractor; deterministic given the seed."""
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        fresh = type(model.extractor)(
            dim=model.dim, n_patterns=model.n_patterns, heads=model.heads,
            depth=model.extractor_depth,
        )
        model.extractor.load_state_dict(fresh.state_dict())
        fresh_analyzer = type(model.analyzer)(
            dim=model.dim, heads=model.heads, depth=model.analyzer_depth
        )
        model.analyzer.load_state_dict(fresh_analyzer.state_dict())
