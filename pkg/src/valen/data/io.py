"""Dataset serialization.

Layout of a dataset directory:
  manifest.txt      key=value lines (UTF-8), dataset-level header
  records.jsonl     one JSON line per instance: answer index, attribute
                    annotations, rule metadata / concept
  instance_%05d.bin little-endian float32 panels, statement then pool,
                    row-major; bit-exact round trip
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataError
from .types import (
    AttributeTuple,
    DatasetManifest,
    FORMAT_VERSION,
    ReasoningInstance,
    RuleMetadata,
)


def _attrs_to_json(attrs: AttributeTuple) -> dict:
    return {
        "shape_type": attrs.shape_type,
        "size_level": attrs.size_level,
        "count": attrs.count,
        "rotation_deg": attrs.rotation_deg,
        "jitter": attrs.jitter,
    }


def _attrs_from_json(obj: dict) -> AttributeTuple:
    return AttributeTuple(**obj)


def save_dataset(directory, instances: list[ReasoningInstance], manifest: DatasetManifest) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if manifest.instance_count != len(instances):
        raise DataError(
            f"manifest instance_count {manifest.instance_count} != {len(instances)} instances"
        )
    lines = [
        f"format_version={manifest.format_version}",
        f"kind={manifest.kind}",
        f"instance_count={manifest.instance_count}",
        f"panel_height={manifest.panel_height}",
        f"panel_width={manifest.panel_width}",
        f"seed={manifest.seed}",
        f"metadata_vocabulary={','.join(manifest.metadata_vocabulary)}",
    ]
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    with (directory / "records.jsonl").open("w", encoding="utf-8") as fh:
        for idx, inst in enumerate(instances):
            record = {
                "kind": inst.kind,
                "answer_index": inst.answer_index,
                "statement_attrs": [_attrs_to_json(a) for a in inst.statement_attrs],
                "pool_attrs": [_attrs_to_json(a) for a in inst.pool_attrs],
                "metadata": list(inst.metadata.entries) if inst.metadata else None,
                "concept": inst.concept,
                "aux_test_index": inst.aux_test_index,
            }
            fh.write(json.dumps(record) + "\n")
            blob = np.concatenate([inst.statement, inst.pool]).astype("<f4")
            (directory / f"instance_{idx:05d}.bin").write_bytes(blob.tobytes())


def load_dataset(directory) -> tuple[list[ReasoningInstance], DatasetManifest]:
    directory = Path(directory)
    manifest_path = directory / "manifest.txt"
    if not manifest_path.exists():
        raise DataError(f"missing manifest: {manifest_path}")
    fields = {}
    for line in manifest_path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            fields[key] = value
    version = int(fields["format_version"])
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported format_version {version}, expected {FORMAT_VERSION}")
    manifest = DatasetManifest(
        kind=fields["kind"],
        instance_count=int(fields["instance_count"]),
        panel_height=int(fields["panel_height"]),
        panel_width=int(fields["panel_width"]),
        seed=int(fields["seed"]),
        metadata_vocabulary=[t for t in fields["metadata_vocabulary"].split(",") if t],
        format_version=version,
    )

    records = []
    records_path = directory / "records.jsonl"
    if manifest.instance_count > 0 or records_path.exists():
        with records_path.open("r", encoding="utf-8") as fh:
            records = [json.loads(line) for line in fh if line.strip()]
    if len(records) != manifest.instance_count:
        raise DataError(
            f"records.jsonl holds {len(records)} records, manifest says {manifest.instance_count}"
        )

    h, w = manifest.panel_height, manifest.panel_width
    instances = []
    for idx, record in enumerate(records):
        n_statement = len(record["statement_attrs"])
        n_pool = len(record["pool_attrs"])
        raw = (directory / f"instance_{idx:05d}.bin").read_bytes()
        expected = (n_statement + n_pool) * h * w * 4
        if len(raw) != expected:
            raise DataError(
                f"instance {idx}: blob holds {len(raw)} bytes, expected {expected}"
            )
        panels = np.frombuffer(raw, dtype="<f4").reshape(n_statement + n_pool, h, w)
        metadata = None
        if record["metadata"] is not None:
            metadata = RuleMetadata(entries=tuple(tuple(e) for e in record["metadata"]))
        instances.append(
            ReasoningInstance(
                kind=record["kind"],
                statement=panels[:n_statement].copy(),
                pool=panels[n_statement:].copy(),
                answer_index=record["answer_index"],
                statement_attrs=tuple(_attrs_from_json(a) for a in record["statement_attrs"]),
                pool_attrs=tuple(_attrs_from_json(a) for a in record["pool_attrs"]),
                metadata=metadata,
                concept=record["concept"],
                aux_test_index=record["aux_test_index"],
            )
        )
    return instances, manifest
