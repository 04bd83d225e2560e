"""Ablation matrix over the funny regression tasks and decoder variants."""

from __future__ import annotations

import dataclasses
import json
import traceback
from pathlib import Path

import numpy as np

from ..data import load_dataset
from ..errors import ConfigError
from .config import RunConfig
from .training import train

DEFAULT_VARIANTS = (
    ("full", "half-split"),
    ("f2", "half-split"),
    ("f3", "half-split"),
    ("full", "normal"),
    ("f2", "normal"),
    ("f3", "normal"),
)


def reconstruction_floor(instances) -> float:
    """Dataset mean of the per-pixel infimum mean((x - 0.5)^2) of the
    half-split reconstruction loss."""
    panels = np.concatenate([np.concatenate([i.statement, i.pool]) for i in instances])
    return float(((panels - 0.5) ** 2).mean())


def ablate(base_config: RunConfig, variants=DEFAULT_VARIANTS) -> dict:
    """Run every (ablation, decoder) cell with a shared seed and dataset.

    A crashing cell is marked failed; the others still complete. Returns
    {"cells": [...], "floor": float, "table": str} and writes table.txt
    plus ablation.json under base_config.out_dir.
    """
    for ablation, decoder in variants:
        if ablation not in ("full", "f1", "f2", "f3") or decoder not in ("half-split", "normal"):
            raise ConfigError(f"unknown ablation variant: {(ablation, decoder)!r}")
    out_root = Path(base_config.out_dir)
    instances, _ = load_dataset(base_config.dataset)
    floor = reconstruction_floor(instances)

    cells = []
    for ablation, decoder in variants:
        name = f"{ablation}_{decoder.replace('-', '')}"
        cfg = dataclasses.replace(
            base_config,
            method="funny+valen",
            ablation=ablation,
            decoder=decoder,
            out_dir=str(out_root / name),
        )
        cell = {"ablation": ablation, "decoder": decoder, "name": name}
        try:
            _, run_report = train(cfg)
            cell["status"] = "ok"
            cell["accuracy"] = run_report["metrics"]["accuracy"]
            cell["final_losses"] = run_report["loss_curves"][-1]
        except Exception as exc:  # isolate cell failures
            cell["status"] = "failed"
            cell["error"] = f"{type(exc).__name__}: {exc}"
            traceback.print_exc()
        cells.append(cell)

    rows = [f"{'variant':<22}{'decoder':<12}{'status':<8}{'accuracy':<10}floor"]
    for cell in cells:
        acc = f"{cell.get('accuracy', float('nan')):.3f}" if cell["status"] == "ok" else "-"
        rows.append(
            f"{cell['ablation']:<22}{cell['decoder']:<12}{cell['status']:<8}{acc:<10}{floor:.4f}"
        )
    table = "\n".join(rows)
    result = {"cells": cells, "floor": floor, "table": table}
    out_root.mkdir(parents=True, exist_ok=True)
    (out_root / "table.txt").write_text(table + "\n", encoding="utf-8")
    (out_root / "ablation.json").write_text(json.dumps(result, indent=2), encoding="utf-8")
    return result
