"""Run configuration: plain key=value files or keyword construction."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigError

METHODS = ("valen", "valen+tine", "funny+valen", "sbr+valen", "funny+valen+tine")


@dataclass
class RunConfig:
    dataset: str
    out_dir: str
    method: str = "valen"
    eval_dataset: str | None = None

    # model dims
    dim: int = 64
    n_views: int = 4
    n_patterns: int = 2
    encoder_depth: int = 3
    extractor_depth: int = 2
    analyzer_depth: int = 2
    heads: int = 4

    # optimizer
    lr: float = 3e-4
    batch_size: int = 32
    epochs: int = 50
    grad_clip: float = 1.0
    seed: int = 0

    # method flags
    ablation: str = "full"  # funny: full | f1 | f2 | f3
    decoder: str = "half-split"  # funny: half-split | normal
    gen_steps: int = 1  # tine alternation ratio
    solver_steps: int = 1
    pgm_positional: bool = False  # tine diagonal-symmetric statement encoding

    def validate(self, dataset_kind: str) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method: {self.method!r}; expected one of {METHODS}")
        if dataset_kind not in ("rpm", "bongard"):
            raise ConfigError(f"unknown dataset kind: {dataset_kind!r}")
        if "sbr" in self.method and dataset_kind != "rpm":
            raise ConfigError("sbr is RPM-only; incompatible with a bongard dataset")
        if self.ablation not in ("full", "f1", "f2", "f3"):
            raise ConfigError(f"unknown ablation: {self.ablation!r}")
        if self.decoder not in ("half-split", "normal"):
            raise ConfigError(f"unknown decoder: {self.decoder!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ConfigError("epochs and batch_size must be >= 1 and lr > 0")
        if self.gen_steps < 1 or self.solver_steps < 1:
            raise ConfigError("alternation ratios must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, fields: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(fields) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**fields)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        """Parse a key=value config file (UTF-8, # comments)."""
        fields: dict = {}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep:
                raise ConfigError(f"malformed config line: {line!r}")
            if key not in types:
                raise ConfigError(f"unknown config key: {key!r}")
            fields[key] = _coerce(key, value, types[key])
        return cls.from_dict(fields)


def _coerce(key: str, value: str, annotation: str):
    if "None" in annotation and value in ("", "None", "none"):
        return None
    if "bool" in annotation:
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if "int" in annotation:
            return int(value)
        if "float" in annotation:
            return float(value)
    except ValueError:
        raise ConfigError(f"{key}: could not parse {value!r}") from None
    return value
