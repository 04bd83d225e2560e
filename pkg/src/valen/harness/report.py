"""Plots and text summaries over completed run directories."""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

_MECHANISMS = {
    "valen": "baseline solver: incomplete-matrix enumeration, pattern extraction, consistency scoring",
    "valen+tine": "adversarial representation-space negatives tighten the solution distribution",
    "funny+valen": "center/bias Gaussian-mixture planning of sample representations",
    "sbr+valen": "metadata-supervised Gaussian-mixture planning of pattern representations",
    "funny+valen+tine": "joint center/bias planning and adversarial negatives",
}


def report(run_dirs, out_dir) -> dict:
    """Emit loss-curve plots, an accuracy bar chart grouped by dataset kind,
    and summary.txt; run dirs without a report.json are skipped with a warning."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = []
    for run_dir in run_dirs:
        path = Path(run_dir) / "report.json"
        if not path.exists():
            warnings.warn(f"skipping {run_dir}: no report.json")
            continue
        runs.append((Path(run_dir).name, json.loads(path.read_text(encoding="utf-8"))))
    if not runs:
        return {"runs": 0}

    artifacts = []
    for name, run in runs:
        fig, ax = plt.subplots(figsize=(6, 4))
        curves = run["loss_curves"]
        terms = sorted({k for epoch in curves for k in epoch if k != "mean_generated_score"})
        for term in terms:
            ax.plot([epoch.get(term) for epoch in curves], label=term)
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.set_title(f"{name} ({run['config']['method']})")
        ax.legend(fontsize=8)
        path = out_dir / f"loss_{name}.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        artifacts.append(str(path))

    fig, ax = plt.subplots(figsize=(7, 4))
    kinds = sorted({run["kind"] for _, run in runs})
    offset = 0
    for kind in kinds:
        group = [(name, run) for name, run in runs if run["kind"] == kind]
        xs = range(offset, offset + len(group))
        ax.bar(list(xs), [run["metrics"]["accuracy"] for _, run in group], label=kind)
        offset += len(group) + 1
    labels = [name for kind in kinds for name, run in runs if run["kind"] == kind]
    ticks, pos = [], 0
    for kind in kinds:
        n = sum(1 for _, run in runs if run["kind"] == kind)
        ticks.extend(range(pos, pos + n))
        pos += n + 1
    ax.set_xticks(ticks, labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("accuracy")
    ax.legend()
    bar_path = out_dir / "accuracy.png"
    fig.savefig(bar_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    artifacts.append(str(bar_path))

    lines = []
    for name, run in runs:
        method = run["config"]["method"]
        metrics = ", ".join(f"{k}={v:.3f}" for k, v in run["metrics"].items()
                            if isinstance(v, float))
        lines.append(f"{name}: method={method} [{run['kind']}] {metrics}")
        lines.append(f"  exercises: {_MECHANISMS.get(method, 'unknown method')}")
    summary_path = out_dir / "summary.txt"
    summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    artifacts.append(str(summary_path))
    return {"runs": len(runs), "artifacts": artifacts}
