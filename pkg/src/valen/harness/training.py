"""Training loops for every method combination."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from ..data import load_dataset
from ..errors import ConfigError
from ..methods.funny import bongard_augment, funny_training_step
from ..methods.tine import adversarial_step, generate_auxiliary
from .bundle import SolverBundle, checkpoint_hash
from .config import RunConfig
from .evaluate import evaluate


def _batch_tensors(instances, rng: np.random.Generator, augment: bool = False,
                   vocabulary: list[str] | None = None):
    """Stack a batch; pool order is shuffled per instance with the label
    permuted accordingly, so position carries no signal."""
    statements, pools, answers, metas = [], [], [], []
    for inst in instances:
        perm = rng.permutation(inst.pool.shape[0])
        statement, pool = inst.statement, inst.pool[perm]
        if augment:
            statement = np.stack([bongard_augment(p, rng) for p in statement])
            pool = np.stack([bongard_augment(p, rng) for p in pool])
        statements.append(torch.from_numpy(np.ascontiguousarray(statement)))
        pools.append(torch.from_numpy(np.ascontiguousarray(pool)))
        answers.append(int(np.nonzero(perm == inst.answer_index)[0][0]))
        if vocabulary and inst.metadata is not None:
            metas.append(torch.from_numpy(inst.metadata.one_hot(vocabulary)))
    meta = torch.stack(metas) if metas else None
    return (
        torch.stack(statements),
        torch.stack(pools),
        torch.tensor(answers, dtype=torch.long),
        meta,
    )


def _correct_matrix_patterns(bundle: SolverBundle, statement, pool, answer):
    """PatternSet of the statement completed by the true option."""
    b = statement.shape[0]
    answer_panel = pool[torch.arange(b), answer].unsqueeze(1)
    reps = bundle.solver.encode_panels(torch.cat([statement, answer_panel], dim=1))
    return bundle.solver.extract_pattern_set(reps)


def _tine_with_funny_step(bundle: SolverBundle, statement, pool, answer, phase,
                          optimizer, config, torch_gen):
    """Alternating step when the funny extractor replaces the solver's own."""
    funny, solver, gen = bundle.funny, bundle.solver, bundle.tine_generator
    center, _ = funny.encoder(torch.cat([statement, pool], dim=1))
    eps = torch.randn(center.shape, generator=torch_gen, dtype=center.dtype)
    reps = center + eps
    statement_reps, pool_reps = reps[:, :8], reps[:, 8:]
    real_scores = solver.score_candidates(statement_reps, pool_reps)
    if phase == "generator":
        aux = generate_auxiliary(solver, gen, statement_reps)
        gen_scores = solver.score_candidates(statement_reps, aux)
        logits = torch.cat(
            [real_scores.detach().unsqueeze(1).expand(-1, gen.n_tokens, -1),
             gen_scores.unsqueeze(-1)], dim=-1).reshape(-1, 9)
        target = torch.full((logits.shape[0],), 8, dtype=torch.long)
        losses = {"generator": F.cross_entropy(logits, target)}
        total = losses["generator"]
    else:
        with torch.no_grad():
            aux = generate_auxiliary(solver, gen, statement_reps)
        gen_scores = solver.score_candidates(statement_reps, aux.detach())
        widened = torch.cat([real_scores, gen_scores], dim=1)
        losses = funny_training_step(statement, pool, answer, solver, funny,
                                     config.ablation, torch_gen)
        losses["reasoning"] = F.cross_entropy(widened, answer)
        total = sum(losses.values())
    optimizer.zero_grad()
    total.backward()
    params = [p for g in optimizer.param_groups for p in g["params"]]
    torch.nn.utils.clip_grad_norm_(params, config.grad_clip)
    optimizer.step()
    return {k: float(v.detach()) for k, v in losses.items()}


def train(config: RunConfig) -> tuple[SolverBundle, dict]:
    """Run the configured objective composition; returns (bundle, report).

    Writes checkpoint.pt and report.json into config.out_dir and refuses
    to reuse an existing run directory.
    """
    instances, manifest = load_dataset(config.dataset)
    config.validate(manifest.kind)
    out_dir = Path(config.out_dir)
    if out_dir.exists():
        raise ConfigError(f"run directory already exists: {out_dir}")
    out_dir.mkdir(parents=True)

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    torch_gen = torch.Generator().manual_seed(config.seed + 1)
    bundle = SolverBundle(config, manifest.kind, manifest.metadata_vocabulary)
    for module in bundle.modules().values():
        module.train()

    solver_params = list(bundle.solver.parameters())
    if bundle.funny is not None:
        solver_params += list(bundle.funny.parameters())
    if bundle.sbr is not None:
        solver_params += list(bundle.sbr.parameters())
    solver_opt = torch.optim.Adam(solver_params, lr=config.lr)
    gen_opt = None
    if bundle.tine_generator is not None:
        gen_opt = torch.optim.Adam(bundle.tine_generator.parameters(), lr=config.lr)

    method, kind = config.method, manifest.kind
    augment = "funny" in method and kind == "bongard"
    start = time.monotonic()
    curves: list[dict] = []

    for epoch in range(config.epochs):
        order = rng.permutation(len(instances))
        sums: dict[str, float] = {}
        n_batches = 0
        for lo in range(0, len(instances), config.batch_size):
            batch = [instances[i] for i in order[lo:lo + config.batch_size]]
            statement, pool, answer, meta = _batch_tensors(
                batch, rng, augment=augment,
                vocabulary=manifest.metadata_vocabulary if "sbr" in method else None,
            )
            terms = _train_batch(bundle, statement, pool, answer, meta, config,
                                 solver_opt, gen_opt, torch_gen)
            for name, value in terms.items():
                sums[name] = sums.get(name, 0.0) + value
            n_batches += 1
        means = {name: value / n_batches for name, value in sums.items()}
        means["total"] = sum(v for k, v in means.items() if k != "mean_generated_score")
        curves.append(means)

    wall_clock = time.monotonic() - start
    checkpoint_path = out_dir / "checkpoint.pt"
    bundle.eval()
    bundle.save(checkpoint_path)

    eval_path = config.eval_dataset or config.dataset
    eval_instances, eval_manifest = load_dataset(eval_path)
    metrics = evaluate(bundle, eval_instances, eval_manifest)

    run_report = {
        "config": config.to_dict(),
        "kind": kind,
        "loss_curves": curves,
        "metrics": metrics,
        "wall_clock_seconds": wall_clock,
        "checkpoint_hash": checkpoint_hash(checkpoint_path),
    }
    (out_dir / "report.json").write_text(json.dumps(run_report, indent=2), encoding="utf-8")
    return bundle, run_report


def _train_batch(bundle: SolverBundle, statement, pool, answer, meta,
                 config: RunConfig, solver_opt, gen_opt, torch_gen) -> dict[str, float]:
    method, kind = config.method, bundle.kind

    if method == "valen+tine" or (method == "funny+valen+tine" and kind == "bongard"):
        # bongard-side funny is augmentation only; alternation is the
        # plain solver/generator loop either way
        terms = {}
        for _ in range(config.gen_steps):
            out = adversarial_step(statement, pool, answer, bundle.solver,
                                   bundle.tine_generator, "generator", gen_opt,
                                   config.grad_clip)
            terms["generator"] = float(out["generator"].detach())
            terms["mean_generated_score"] = float(out["mean_generated_score"].detach())
        for _ in range(config.solver_steps):
            out = adversarial_step(statement, pool, answer, bundle.solver,
                                   bundle.tine_generator, "solver", solver_opt,
                                   config.grad_clip)
            terms["solver"] = float(out["solver"].detach())
        return terms

    if method == "funny+valen+tine" and kind == "rpm":
        terms = {}
        for _ in range(config.gen_steps):
            terms.update(_tine_with_funny_step(bundle, statement, pool, answer,
                                               "generator", gen_opt, config, torch_gen))
        for _ in range(config.solver_steps):
            terms.update(_tine_with_funny_step(bundle, statement, pool, answer,
                                               "solver", solver_opt, config, torch_gen))
        return terms

    if method == "funny+valen" and kind == "rpm":
        losses = funny_training_step(statement, pool, answer, bundle.solver,
                                     bundle.funny, config.ablation, torch_gen)
        total = sum(losses.values())
    elif method == "sbr+valen":
        scores = bundle.solver(statement, pool)
        losses = {"reasoning": F.cross_entropy(scores, answer)}
        patterns = _correct_matrix_patterns(bundle, statement, pool, answer)
        losses["sbr"] = bundle.sbr.loss(patterns, meta, generator=torch_gen)
        total = losses["reasoning"] + losses["sbr"]
    else:  # plain valen CE (also funny-on-bongard: augmentation happened upstream)
        scores = bundle.solver(statement, pool)
        losses = {"reasoning": F.cross_entropy(scores, answer)}
        total = losses["reasoning"]

    solver_opt.zero_grad()
    total.backward()
    params = [p for g in solver_opt.param_groups for p in g["params"]]
    torch.nn.utils.clip_grad_norm_(params, config.grad_clip)
    solver_opt.step()
    return {k: float(v.detach()) for k, v in losses.items()}
