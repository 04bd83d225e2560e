"""Procedural mini-RPM generation and the independent rule checker.

Each instance is a 3x3 matrix of panels. Two governing rules, one over
shape_type and one over size_level, hold along every row; glyph count is
held constant across the matrix and acts as the third key attribute.
Distractors perturb exactly one key attribute of the answer, cycling
through the three attributes, which guarantees a unique correct option.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import GenerationError
from .render import render_panel
from .types import AttributeTuple, DatasetManifest, ReasoningInstance, RuleMetadata, RULE_NAMES, SHAPE_TYPES

_KEY_ATTRS = ("shape_type", "size_level")
_PERTURB_CYCLE = ("shape_type", "size_level", "count")


@dataclass
class RpmConfig:
    instance_count: int
    seed: int = 0
    rules: tuple[str, ...] = RULE_NAMES

    def vocabulary(self) -> list[str]:
        """Canonical (attribute, rule) vocabulary; order defines component index."""
        return [f"{attr}:{rule}" for attr in _KEY_ATTRS for rule in self.rules]


def _check_rules(rules) -> None:
    if len(rules) == 0:
        raise GenerationError("rule set is empty")
    for rule in rules:
        if rule not in RULE_NAMES:
            raise GenerationError(f"unknown rule: {rule!r}")


def _gen_row(rule: str, rng: np.random.Generator, base: np.ndarray, row: int) -> list[int]:
    """One row of value indices (0..2) under the rule."""
    if rule == "constant":
        v = int(rng.integers(3))
        return [v, v, v]
    if rule == "increment":
        start = int(rng.integers(3))
        return [(start + j) % 3 for j in range(3)]
    if rule == "distribute_three":
        # Latin square built from a per-instance base permutation.
        return [int(base[(j + row) % 3]) for j in range(3)]
    raise GenerationError(f"unknown rule: {rule!r}")


def check_row(rule: str, v1: int, v2: int, v3: int) -> bool:
    """Does the value triple satisfy the rule? Independent of generation."""
    if rule == "constant":
        return v1 == v2 == v3
    if rule == "increment":
        return v2 == (v1 + 1) % 3 and v3 == (v2 + 1) % 3
    if rule == "distribute_three":
        return {v1, v2, v3} == {0, 1, 2}
    raise GenerationError(f"unknown rule: {rule!r}")


def _attr_value_index(attrs: AttributeTuple, name: str) -> int:
    if name == "shape_type":
        return SHAPE_TYPES.index(attrs.shape_type)
    if name == "size_level":
        return attrs.size_level - 1
    raise ValueError(name)


def rule_consistent_panels(
    statement_attrs, pool_attrs, metadata: RuleMetadata
) -> list[int]:
    """Exhaustive check: which pool panels complete every rule of the matrix.

    A candidate is consistent iff each governed attribute satisfies its rule
    on the third row and the glyph count matches the matrix's constant count.
    """
    consistent = []
    for idx, cand in enumerate(pool_attrs):
        ok = all(s.count == cand.count for s in statement_attrs)
        for attr, rule in metadata.entries:
            row3 = (
                _attr_value_index(statement_attrs[6], attr),
                _attr_value_index(statement_attrs[7], attr),
                _attr_value_index(cand, attr),
            )
            ok = ok and check_row(rule, *row3)
        if ok:
            consistent.append(idx)
    return consistent


def check_rpm_instance(instance: ReasoningInstance) -> bool:
    """True iff exactly one pool panel is rule consistent and sits at answer_index."""
    hits = rule_consistent_panels(instance.statement_attrs, instance.pool_attrs, instance.metadata)
    return hits == [instance.answer_index]


def _sample_nonkey(rng: np.random.Generator) -> tuple[float, float]:
    return float(rng.uniform(0.0, 360.0)), float(rng.uniform(-1.0, 1.0))


def _make_attrs(shape_idx: int, size_idx: int, count: int, rng: np.random.Generator) -> AttributeTuple:
    rot, jit = _sample_nonkey(rng)
    return AttributeTuple(
        shape_type=SHAPE_TYPES[shape_idx],
        size_level=size_idx + 1,
        count=count,
        rotation_deg=rot,
        jitter=jit,
    )


def _generate_instance(config: RpmConfig, rng: np.random.Generator) -> ReasoningInstance:
    rule_shape = str(rng.choice(config.rules))
    rule_size = str(rng.choice(config.rules))
    count = int(rng.integers(1, 4))
    base_shape = rng.permutation(3)
    base_size = rng.permutation(3)

    shape_grid = [_gen_row(rule_shape, rng, base_shape, r) for r in range(3)]
    size_grid = [_gen_row(rule_size, rng, base_size, r) for r in range(3)]
    cells = [
        _make_attrs(shape_grid[r][c], size_grid[r][c], count, rng)
        for r in range(3)
        for c in range(3)
    ]
    answer = cells[8]

    distractors = []
    for j in range(7):
        attr = _PERTURB_CYCLE[j % 3]
        shape_idx = SHAPE_TYPES.index(answer.shape_type)
        size_idx = answer.size_level - 1
        d_count = answer.count
        if attr == "shape_type":
            shape_idx = int((shape_idx + 1 + rng.integers(2)) % 3)
        elif attr == "size_level":
            size_idx = int((size_idx + 1 + rng.integers(2)) % 3)
        else:
            d_count = int((d_count - 1 + 1 + rng.integers(2)) % 3) + 1
        distractors.append(_make_attrs(shape_idx, size_idx, d_count, rng))

    statement_attrs = tuple(cells[:8])
    pool_attrs = tuple([answer] + distractors)
    metadata = RuleMetadata(entries=(("shape_type", rule_shape), ("size_level", rule_size)))

    instance = ReasoningInstance(
        kind="rpm",
        statement=np.stack([render_panel(a) for a in statement_attrs]),
        pool=np.stack([render_panel(a) for a in pool_attrs]),
        answer_index=0,
        statement_attrs=statement_attrs,
        pool_attrs=pool_attrs,
        metadata=metadata,
    )
    if not check_rpm_instance(instance):
        raise GenerationError(
            f"generated instance fails the exhaustive checker under rules "
            f"({rule_shape}, {rule_size})"
        )
    return instance


def generate_rpm_dataset(config: RpmConfig) -> tuple[list[ReasoningInstance], DatasetManifest]:
    """Generate a mini-RPM dataset; fully reproducible from (config, seed)."""
    _check_rules(config.rules)
    if config.instance_count < 0:
        raise GenerationError("instance_count must be non-negative")
    seeds = np.random.SeedSequence(config.seed).spawn(config.instance_count)
    instances = [_generate_instance(config, np.random.default_rng(s)) for s in seeds]
    manifest = DatasetManifest(
        kind="rpm",
        instance_count=config.instance_count,
        panel_height=32,
        panel_width=32,
        seed=config.seed,
        metadata_vocabulary=config.vocabulary(),
    )
    return instances, manifest
