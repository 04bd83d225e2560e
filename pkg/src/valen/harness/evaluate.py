"""Accuracy metrics for trained bundles."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import ConfigError, DataError
from ..methods.sbr import interpret_patterns, viewpoint_average


def evaluate(bundle, instances, manifest, batch_size: int = 16) -> dict:
    """RPM: top-1 option accuracy (plus pattern accuracy when the bundle
    carries the metadata-mixture head). Bongard: instance accuracy (primary
    test outscores auxiliary test, strict) and per-test-image accuracy
    against the auxiliary-group mean score."""
    if len(instances) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    if manifest.panel_height != 32 or manifest.panel_width != 32:
        raise ConfigError(
            f"panel_height/panel_width {manifest.panel_height}x{manifest.panel_width} "
            "incompatible with the model input size 32x32"
        )
    if manifest.kind != bundle.kind:
        raise ConfigError(f"dataset kind {manifest.kind} != model kind {bundle.kind}")

    bundle.eval()
    correct = 0
    pattern_hits = 0
    pattern_total = 0
    pair_correct = 0
    image_correct = 0
    with torch.no_grad():
        for lo in range(0, len(instances), batch_size):
            batch = instances[lo:lo + batch_size]
            statement = torch.from_numpy(np.stack([i.statement for i in batch]))
            pool = torch.from_numpy(np.stack([i.pool for i in batch]))
            answers = torch.tensor([i.answer_index for i in batch])
            scores = bundle.score_batch(statement, pool)
            correct += int((scores.argmax(dim=1) == answers).sum())

            if bundle.kind == "bongard":
                aux_idx = torch.tensor([i.aux_test_index for i in batch])
                primary = scores[torch.arange(len(batch)), answers]
                aux_test = scores[torch.arange(len(batch)), aux_idx]
                pair_correct += int((primary > aux_test).sum())
                mask = torch.ones_like(scores, dtype=torch.bool)
                mask[torch.arange(len(batch)), answers] = False
                mask[torch.arange(len(batch)), aux_idx] = False
                threshold = (scores * mask).sum(dim=1) / mask.sum(dim=1)
                image_correct += int((primary > threshold).sum())
                image_correct += int((aux_test <= threshold).sum())

            if bundle.sbr is not None:
                patterns = _answer_matrix_patterns(bundle, statement, pool, answers)
                p_bar = viewpoint_average(patterns)
                prototypes = bundle.sbr.prototypes(
                    noise=torch.zeros(len(bundle.vocabulary), bundle.sbr.n_draws,
                                      bundle.config.dim)
                )
                preds = interpret_patterns(p_bar, prototypes, bundle.sbr.tau)
                for inst, pred in zip(batch, preds):
                    truth = inst.metadata.one_hot(bundle.vocabulary).argmax(axis=1)
                    pattern_hits += int((pred.numpy() == truth).sum())
                    pattern_total += len(truth)

    metrics = {"accuracy": correct / len(instances), "n_instances": len(instances)}
    if bundle.kind == "bongard":
        metrics["instance_accuracy"] = pair_correct / len(instances)
        metrics["image_accuracy"] = image_correct / (2 * len(instances))
    if pattern_total:
        metrics["pattern_accuracy"] = pattern_hits / pattern_total
    return metrics


def _answer_matrix_patterns(bundle, statement, pool, answers):
    b = statement.shape[0]
    answer_panel = pool[torch.arange(b), answers].unsqueeze(1)
    reps = bundle.solver.encode_panels(torch.cat([statement, answer_panel], dim=1))
    return bundle.solver.extract_pattern_set(reps)
