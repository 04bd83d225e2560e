"""Core dataset record types for mini-RPM and mini-Bongard instances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Canonical reasoning shapes; "star" is the concave extra used only by
# Bongard auxiliary panels.
SHAPE_TYPES = ("triangle", "square", "circle")
EXTRA_SHAPES = ("star",)
RULE_NAMES = ("constant", "increment", "distribute_three")

FORMAT_VERSION = 1


@dataclass(frozen=True)
class AttributeTuple:
    """Attributes of one panel.

    shape_type, size_level and count are key attributes: they fully
    determine reasoning identity. rotation_deg and jitter are non-key and
    only perturb pixels.
    """

    shape_type: str
    size_level: int
    count: int
    rotation_deg: float = 0.0
    jitter: float = 0.0

    def validate(self, allow_extra_shapes: bool = False) -> None:
        shapes = SHAPE_TYPES + EXTRA_SHAPES if allow_extra_shapes else SHAPE_TYPES
        if self.shape_type not in shapes:
            raise ValueError(f"shape_type out of range: {self.shape_type!r}")
        if not (isinstance(self.size_level, int) and 1 <= self.size_level <= 3):
            raise ValueError(f"size_level out of range: {self.size_level!r}")
        if not (isinstance(self.count, int) and 1 <= self.count <= 3):
            raise ValueError(f"count out of range: {self.count!r}")
        if not (0.0 <= self.rotation_deg < 360.0):
            raise ValueError(f"rotation_deg out of range: {self.rotation_deg!r}")
        if not (-1.0 <= self.jitter <= 1.0):
            raise ValueError(f"jitter out of range: {self.jitter!r}")

    def key(self) -> tuple:
        """Reasoning identity: the key attributes only."""
        return (self.shape_type, self.size_level, self.count)


@dataclass(frozen=True)
class RuleMetadata:
    """Per-instance rule annotation: (attribute_name, rule_name) pairs."""

    entries: tuple[tuple[str, str], ...]

    def one_hot(self, vocabulary: list[str]) -> np.ndarray:
        """One-hot matrix [M, S] over the dataset metadata vocabulary."""
        meta = np.zeros((len(self.entries), len(vocabulary)), dtype=np.float32)
        for m, (attr, rule) in enumerate(self.entries):
            token = f"{attr}:{rule}"
            if token not in vocabulary:
                raise ValueError(f"metadata entry outside vocabulary: {token}")
            meta[m, vocabulary.index(token)] = 1.0
        return meta


@dataclass
class ReasoningInstance:
    """One puzzle: statement panels, candidate pool, answer index, annotations.

    RPM: 8 statement panels, 8 pool panels, rule metadata.
    Transformed Bongard: 6 statement panels, 8 pool panels; pool position 0
    holds the primary test panel, aux_test_index the auxiliary test panel.
    """

    kind: str  # "rpm" | "bongard"
    statement: np.ndarray  # [n_statement, H, W] float32 in [0, 1]
    pool: np.ndarray  # [8, H, W] float32 in [0, 1]
    answer_index: int
    statement_attrs: tuple[AttributeTuple, ...] = ()
    pool_attrs: tuple[AttributeTuple, ...] = ()
    metadata: RuleMetadata | None = None
    concept: str | None = None
    aux_test_index: int | None = None

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReasoningInstance):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.statement.shape == other.statement.shape
            and np.array_equal(self.statement, other.statement)
            and np.array_equal(self.pool, other.pool)
            and self.answer_index == other.answer_index
            and self.statement_attrs == other.statement_attrs
            and self.pool_attrs == other.pool_attrs
            and self.metadata == other.metadata
            and self.concept == other.concept
            and self.aux_test_index == other.aux_test_index
        )


@dataclass
class DatasetManifest:
    """Dataset-level header; vocabulary order is the canonical component index."""

    kind: str
    instance_count: int
    panel_height: int
    panel_width: int
    seed: int
    metadata_vocabulary: list[str] = field(default_factory=list)
    format_version: int = FORMAT_VERSION
