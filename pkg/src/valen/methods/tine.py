"""Adversarial generation of judicious auxiliary-sample representations.

The generator produces representation-space negatives (never pixels) that
the solver should rank low; generator and solver parameters are updated
alternately and exclusively. The Gaussian negative-log-likelihood analysis
that motivates the method lives here too.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import DataError
from ..model.core import OPTION_SLOT, ValenModel
from ..model.vit import _encoder


def gaussian_nll(x, mu, sigma):
    """(x - mu)^2 / (2 sigma^2) - log|sigma|, constant term omitted.

    Accepts floats or tensors; sigma must be positive.
    """
    x = torch.as_tensor(x, dtype=torch.float64) if not isinstance(x, torch.Tensor) else x
    mu = torch.as_tensor(mu, dtype=x.dtype) if not isinstance(mu, torch.Tensor) else mu
    sigma = torch.as_tensor(sigma, dtype=x.dtype) if not isinstance(sigma, torch.Tensor) else sigma
    if (sigma <= 0).any():
        raise ValueError("sigma must be positive")
    return (x - mu) ** 2 / (2.0 * sigma**2) - torch.log(torch.abs(sigma))


def reparameterize(mean: torch.Tensor, log_var: torch.Tensor, noise: torch.Tensor) -> torch.Tensor:
    """mean + exp(0.5 * log_var) * noise; differentiable in mean and log_var."""
    if mean.shape != log_var.shape or mean.shape != noise.shape:
        raise DataError(
            f"shape mismatch: mean {tuple(mean.shape)}, log_var {tuple(log_var.shape)}, "
            f"noise {tuple(noise.shape)}"
        )
    return mean + torch.exp(0.5 * log_var) * noise


# Statement cells 0..7 sit at 3x3 grid positions (r, c); cells whose
# positions mirror across the diagonal share one encoding vector.
_DIAGONAL_SLOT_INDEX = [0, 1, 2, 1, 3, 4, 2, 4]
_N_DIAGONAL_SLOTS = 5


class TineGenerator(nn.Module):
    """Transformer-Encoder generator of L auxiliary representations.

    Input sequence: the 8 statement representations (optionally with the
    diagonal-symmetric positional encoding, PGM-style mode), the M
    option-missing patterns, and L learnable tokens. The L output tokens
    are mapped to (mean, log-variance) pairs and reparameterized.
    """

    def __init__(self, dim: int = 64, n_tokens: int = 9, heads: int = 4, depth: int = 2,
                 pgm_positional: bool = False):
        super().__init__()
        if n_tokens < 1:
            raise ValueError("n_tokens must be >= 1")
        self.dim = dim
        self.n_tokens = n_tokens
        self.pgm_positional = pgm_positional
        self.learnable_tokens = nn.Parameter(torch.randn(n_tokens, dim) * 0.02)
        self.encoder = _encoder(dim, heads, depth)
        self.head = nn.Sequential(nn.Linear(dim, 2 * dim), nn.GELU(), nn.Linear(2 * dim, 2 * dim))
        self.diagonal_pos = nn.Embedding(_N_DIAGONAL_SLOTS, dim)
        self.register_buffer(
            "diagonal_index", torch.tensor(_DIAGONAL_SLOT_INDEX), persistent=False
        )

    def forward(self, statement_reps: torch.Tensor, statement_patterns: torch.Tensor,
                noise: torch.Tensor | None = None) -> torch.Tensor:
        """statement_reps [B, 8, D], statement_patterns [B, M, D] -> [B, L, D].

        noise: standard-normal [B, L, D]; zero tensor bypasses sampling.
        """
        if statement_patterns.shape[-1] != self.dim or statement_patterns.shape[1] == 0:
            raise DataError("missing or malformed statement patterns")
        b = statement_reps.shape[0]
        reps = statement_reps
        if self.pgm_positional:
            if reps.shape[1] != len(_DIAGONAL_SLOT_INDEX):
                raise DataError("diagonal positional encoding requires 8 statement cells")
            reps = reps + self.diagonal_pos(self.diagonal_index).unsqueeze(0)
        seq = torch.cat([reps, statement_patterns, self.learnable_tokens.expand(b, -1, -1)], dim=1)
        out = self.encoder(seq)[:, -self.n_tokens:, :]
        mean, log_var = self.head(out).chunk(2, dim=-1)
        if noise is None:
            noise = torch.randn_like(mean)
        return reparameterize(mean, log_var, noise)


def generate_auxiliary(solver: nn.Module, gen: TineGenerator, statement_reps: torch.Tensor,
                       noise: torch.Tensor | None = None) -> torch.Tensor:
    """statement_reps [B, K, V, D] -> generated candidate reps [B, L, V, D].

    The candidate-missing patterns are produced by the solver's own pattern
    extractor and fed to the generator alongside the statement
    representations. K is 8 for RPM solvers, 6 for Bongard solvers.
    """
    b, k, v, d = statement_reps.shape
    flat = statement_reps.permute(0, 2, 1, 3).reshape(b * v, k, d)
    if isinstance(solver, ValenModel):
        missing = torch.full((b * v,), OPTION_SLOT, dtype=torch.long, device=flat.device)
        patterns = solver.extractor(flat, missing)  # [B*V, M, D]
    else:
        patterns = solver.extractor(flat)
    aux = gen(flat, patterns, noise)  # [B*V, L, D]
    return aux.reshape(b, v, gen.n_tokens, d).permute(0, 2, 1, 3)


def adversarial_step(statement: torch.Tensor, pool: torch.Tensor, answer: torch.Tensor,
                     valen: ValenModel, gen: TineGenerator, phase: str,
                     optimizer: torch.optim.Optimizer, grad_clip: float = 1.0) -> dict:
    """One alternating update; exactly one parameter set changes.

    phase "generator": maximize the solver's opinion of generated
    candidates (non-saturating: CE labeling each generated candidate as
    correct), solver frozen. phase "solver": CE labeling the true option
    as correct with the L generated representations appended as extra
    negatives, generator frozen.

    The optimizer must cover only the parameters of the phase's module.
    """
    if phase not in ("generator", "solver"):
        raise ValueError(f"unknown phase: {phase!r}")
    opt_params = {id(p) for g in optimizer.param_groups for p in g["params"]}
    own = {id(p) for p in (gen if phase == "generator" else valen).parameters()}
    other = {id(p) for p in (valen if phase == "generator" else gen).parameters()}
    if not opt_params <= own or opt_params & other:
        raise ValueError("optimizer parameters cross the generator/solver partition")

    statement_reps = valen.encode_panels(statement)  # [B, 8, V, D]
    pool_reps = valen.encode_panels(pool)  # [B, 8, V, D]
    real_scores = valen.score_candidates(statement_reps, pool_reps)  # [B, 8]

    if phase == "generator":
        aux_reps = generate_auxiliary(valen, gen, statement_reps)
        gen_scores = valen.score_candidates(statement_reps, aux_reps)  # [B, L]
        # one logit row per generated candidate: the 8 real options plus it
        logits = torch.cat(
            [real_scores.detach().unsqueeze(1).expand(-1, gen.n_tokens, -1),
             gen_scores.unsqueeze(-1)], dim=-1,
        ).reshape(-1, 9)
        target = torch.full((logits.shape[0],), 8, dtype=torch.long, device=logits.device)
        loss = F.cross_entropy(logits, target)
        losses = {"generator": loss, "mean_generated_score": gen_scores.mean().detach()}
        params = list(gen.parameters())
    else:
        with torch.no_grad():
            aux_reps = generate_auxiliary(valen, gen, statement_reps)
        gen_scores = valen.score_candidates(statement_reps, aux_reps.detach())
        logits = torch.cat([real_scores, gen_scores], dim=1)  # [B, 8 + L]
        loss = F.cross_entropy(logits, answer)
        losses = {"solver": loss, "mean_generated_score": gen_scores.mean().detach()}
        params = list(valen.parameters())

    optimizer.zero_grad()
    loss.backward()
    if grad_clip is not None:
        torch.nn.utils.clip_grad_norm_(params, grad_clip)
    optimizer.step()
    return losses
