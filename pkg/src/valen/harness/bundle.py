"""The trained-artifact container: models for one run plus checkpoint IO.

Checkpoint layout (torch container): format_version, config echo, dataset
manifest echo, and one named state dict per component under a distinct
namespace ("solver", "tine_generator", "funny", "sbr").
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import torch

from ..errors import ConfigError, DataError
from ..methods.funny import FunnyModules
from ..methods.sbr import SbrHead
from ..methods.tine import TineGenerator
from ..model.bongard import BongardValenModel
from ..model.core import ValenModel
from .config import RunConfig

CHECKPOINT_VERSION = 1


class SolverBundle:
    """All learnable components selected by (config.method, dataset kind)."""

    def __init__(self, config: RunConfig, kind: str, vocabulary: list[str]):
        config.validate(kind)
        self.config = config
        self.kind = kind
        self.vocabulary = list(vocabulary)
        if kind == "rpm":
            self.solver = ValenModel(
                dim=config.dim, n_views=config.n_views, n_patterns=config.n_patterns,
                encoder_depth=config.encoder_depth, extractor_depth=config.extractor_depth,
                analyzer_depth=config.analyzer_depth, heads=config.heads,
            )
        else:
            self.solver = BongardValenModel(
                dim=config.dim, n_views=config.n_views, n_patterns=6,
                heads=config.heads, encoder_depth=config.encoder_depth,
                extractor_depth=config.extractor_depth, analyzer_depth=config.analyzer_depth,
            )
        self.tine_generator = None
        if "tine" in config.method:
            self.tine_generator = TineGenerator(
                dim=config.dim, heads=config.heads, pgm_positional=config.pgm_positional
            )
        self.funny = None
        if "funny" in config.method and kind == "rpm":
            # Bongard-side funny is pure augmentation; no extra parameters.
            self.funny = FunnyModules(
                dim=config.dim, n_views=config.n_views, encoder_depth=config.encoder_depth,
                heads=config.heads, decoder=config.decoder,
            )
        self.sbr = None
        if "sbr" in config.method:
            self.sbr = SbrHead(self.vocabulary, dim=config.dim, heads=config.heads)

    def modules(self) -> dict:
        named = {"solver": self.solver}
        if self.tine_generator is not None:
            named["tine_generator"] = self.tine_generator
        if self.funny is not None:
            named["funny"] = self.funny
        if self.sbr is not None:
            named["sbr"] = self.sbr
        return named

    def eval(self) -> "SolverBundle":
        for module in self.modules().values():
            module.eval()
        return self

    def score_batch(self, statement: torch.Tensor, pool: torch.Tensor) -> torch.Tensor:
        """Evaluation-time scores [B, C]; funny-trained RPM models use the
        center representation alone (the noise path has zero mean)."""
        if self.funny is not None:
            center, _ = self.funny.encoder(torch.cat([statement, pool], dim=1))
            n_statement = statement.shape[1]
            return self.solver.score_candidates(center[:, :n_statement], center[:, n_statement:])
        return self.solver(statement, pool)

    def save(self, path) -> None:
        payload = {
            "format_version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "kind": self.kind,
            "metadata_vocabulary": self.vocabulary,
            "state": {name: mod.state_dict() for name, mod in self.modules().items()},
        }
        torch.save(payload, path)

    @classmethod
    def load(cls, path) -> "SolverBundle":
        path = Path(path)
        if not path.exists():
            raise DataError(f"missing checkpoint: {path}")
        payload = torch.load(path, map_location="cpu", weights_only=False)
        if payload.get("format_version") != CHECKPOINT_VERSION:
            raise ConfigError(
                f"unsupported checkpoint version {payload.get('format_version')}"
            )
        bundle = cls(RunConfig.from_dict(payload["config"]), payload["kind"],
                     payload["metadata_vocabulary"])
        expected = set(bundle.modules())
        stored = set(payload["state"])
        if expected - stored:
            raise DataError(f"checkpoint missing parameter groups: {sorted(expected - stored)}")
        for name, module in bundle.modules().items():
            module.load_state_dict(payload["state"][name])
        return bundle


def checkpoint_hash(path) -> str:
    """Content hash over the named parameter arrays, stable across runs."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    digest = hashlib.sha256()
    for group in sorted(payload["state"]):
        for name in sorted(payload["state"][group]):
            tensor = payload["state"][group][name]
            digest.update(f"{group}.{name}:{tuple(tensor.shape)}".encode())
            digest.update(tensor.numpy().tobytes())
    return digest.hexdigest()
