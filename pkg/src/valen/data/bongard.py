"""Procedural mini-Bongard generation, stored in transformed (RPM-like) form.

A raw instance has 14 panels: x1..x6 primary, x7 primary test, x8..x13
auxiliary, x14 auxiliary test. On disk the instance is already transformed:
statement = x1..x6, pool = x7..x14 (so the answer is pool position 0 and
the auxiliary test panel is pool position 7).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import GenerationError
from .render import render_panel
from .types import AttributeTuple, DatasetManifest, ReasoningInstance, SHAPE_TYPES

_CONVEX_SHAPES = SHAPE_TYPES  # triangle, square, circle


def _rand_attrs(rng, shapes, sizes=(1, 2, 3), counts=(1, 2, 3)) -> AttributeTuple:
    return AttributeTuple(
        shape_type=str(rng.choice(shapes)),
        size_level=int(rng.choice(sizes)),
        count=int(rng.choice(counts)),
        rotation_deg=float(rng.uniform(0.0, 360.0)),
        jitter=float(rng.uniform(-1.0, 1.0)),
    )


# Concept bank: name -> (positive sampler, negative sampler). Positives
# share the concept; negatives violate it.
CONCEPT_BANK = {
    "all_convex": (
        lambda rng: _rand_attrs(rng, _CONVEX_SHAPES),
        lambda rng: _rand_attrs(rng, ("star",)),
    ),
    "all_circles": (
        lambda rng: _rand_attrs(rng, ("circle",)),
        lambda rng: _rand_attrs(rng, ("triangle", "square")),
    ),
    "count_three": (
        lambda rng: _rand_attrs(rng, _CONVEX_SHAPES, counts=(3,)),
        lambda rng: _rand_attrs(rng, _CONVEX_SHAPES, counts=(1, 2)),
    ),
    "all_large": (
        lambda rng: _rand_attrs(rng, _CONVEX_SHAPES, sizes=(3,)),
        lambda rng: _rand_attrs(rng, _CONVEX_SHAPES, sizes=(1, 2)),
    ),
}


@dataclass
class BongardConfig:
    instance_count: int
    seed: int = 0
    concepts: tuple[str, ...] = tuple(CONCEPT_BANK)


def _generate_instance(config: BongardConfig, rng: np.random.Generator) -> ReasoningInstance:
    concept = str(rng.choice(config.concepts))
    positive, negative = CONCEPT_BANK[concept]
    primary = [positive(rng) for _ in range(7)]  # x1..x6 and x7
    auxiliary = [negative(rng) for _ in range(7)]  # x8..x13 and x14

    statement_attrs = tuple(primary[:6])
    pool_attrs = tuple([primary[6]] + auxiliary)
    render = lambda a: render_panel(a, allow_extra_shapes=True)
    return ReasoningInstance(
        kind="bongard",
        statement=np.stack([render(a) for a in statement_attrs]),
        pool=np.stack([render(a) for a in pool_attrs]),
        answer_index=0,
        statement_attrs=statement_attrs,
        pool_attrs=pool_attrs,
        concept=concept,
        aux_test_index=7,
    )


def generate_bongard_dataset(config: BongardConfig) -> tuple[list[ReasoningInstance], DatasetManifest]:
    """Generate a transformed mini-Bongard dataset, reproducible from seed."""
    if len(config.concepts) == 0:
        raise GenerationError("concept bank is empty")
    for name in config.concepts:
        if name not in CONCEPT_BANK:
            raise GenerationError(f"unknown concept: {name!r}")
    if config.instance_count < 0:
        raise GenerationError("instance_count must be non-negative")
    seeds = np.random.SeedSequence(config.seed).spawn(config.instance_count)
    instances = [_generate_instance(config, np.random.default_rng(s)) for s in seeds]
    manifest = DatasetManifest(
        kind="bongard",
        instance_count=config.instance_count,
        panel_height=32,
        panel_width=32,
        seed=config.seed,
        metadata_vocabulary=[],
    )
    return instances, manifest
