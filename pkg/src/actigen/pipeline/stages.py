"""The nine pipeline stages, each reading and writing disk artifacts.

Every stage reads its inputs from the artifact directories of earlier
stages and writes its own outputs under
``<out>/artifacts/<stage>/<config-hash>/``, so running ``pipeline`` equals
running the stages one by one, artifact for artifact.  A RunManifest with
input/output checksums goes to ``<out>/runs/`` -- outside the artifact
tree, because it records wall time.

All stage outputs are deterministic in (config, seed): rerunning any stage
with unchanged inputs overwrites its artifacts with identical bytes.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .. import ala as ala_mod
from .. import city as city_mod
from ..balance import balance, export_weights_csv, resample
from ..core import ActivityChain, chain_from_triples, chain_to_triples, validate_chain
from ..errors import ConfigError
from ..grammar import make_reference_grammar, make_shifted_grammar, synth_population
from ..ingest import load_csv, read_samples, save_csv, split, write_samples
from ..metrics import report
from ..model import (
    SamplingConfig,
    fine_tune,
    generate,
    generation_stats,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .config import PipelineConfig, RunManifest, config_hash, file_sha256

logger = logging.getLogger(__name__)

STAGES = (
    "synth", "ingest", "balance", "train", "finetune",
    "generate", "assign", "evaluate",
)


@dataclass(frozen=True)
class StageResult:
    stage: str
    artifact_dir: Path
    outputs: tuple[str, ...]
    wall_time_s: float
    info: dict


def artifact_dir(config: PipelineConfig, stage: str, create: bool = False) -> Path:
    d = Path(config.out) / "artifacts" / stage / config_hash(config)
    if create:
        d.mkdir(parents=True, exist_ok=True)
    return d


def _input(config: PipelineConfig, stage: str, name: str, strict: bool) -> Path:
    """Locate an input artifact, preferring the current config hash.

    When only artifacts from other config hashes exist, non-strict runs
    fall back to the lexicographically last one with a staleness warning;
    strict runs refuse.
    """
    p = artifact_dir(config, stage) / name
    if p.exists():
        return p
    stage_root = Path(config.out) / "artifacts" / stage
    others = sorted(stage_root.glob(f"*/{name}")) if stage_root.exists() else []
    if others:
        if strict:
            raise ConfigError(
                f"input artifact {stage}/{config_hash(config)}/{name} is missing; "
                f"artifacts exist for other config hashes "
                f"({', '.join(o.parent.name for o in others)}) -- stale under --strict"
            )
        logger.warning(
            "using stale artifact %s (config hash %s differs from current %s)",
            others[-1], others[-1].parent.name, config_hash(config),
        )
        return others[-1]
    raise ConfigError(
        f"missing input artifact {stage}/{config_hash(config)}/{name}; "
        f"run `actigen {stage}` first"
    )


def _write_manifest(
    config: PipelineConfig,
    stage: str,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
    wall: float,
) -> None:
    runs = Path(config.out) / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config_hash=config_hash(config),
        stage=stage,
        seed=config.seed,
        inputs={str(p) : file_sha256(p) for p in inputs},
        outputs={str(p): file_sha256(p) for p in outputs},
        wall_time_s=round(wall, 3),
    )
    (runs / f"{stage}-{config_hash(config)}.json").write_text(manifest.to_json() + "\n")


def _finish(
    config: PipelineConfig,
    stage: str,
    t0: float,
    inputs: Sequence[Path],
    outputs: Sequence[Path],
    info: dict,
) -> StageResult:
    wall = time.time() - t0
    _write_manifest(config, stage, inputs, outputs, wall)
    return StageResult(
        stage=stage,
        artifact_dir=artifact_dir(config, stage),
        outputs=tuple(p.name for p in outputs),
        wall_time_s=wall,
        info=info,
    )


def _grammar(name: str):
    return make_reference_grammar() if name == "reference" else make_shifted_grammar()


def _write_chains(path: Path, ids: Sequence[str], chains: Sequence[ActivityChain]) -> None:
    with path.open("w") as fh:
        for agent_id, chain in zip(ids, chains):
            rec = {"agent_id": agent_id, "chain": chain_to_triples(chain)}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def _read_chains(path: Path) -> tuple[list[str], list[ActivityChain]]:
    ids, chains = [], []
    with path.open() as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                ids.append(rec["agent_id"])
                chains.append(chain_from_triples(rec["chain"]))
    return ids, chains


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2, default=float) + "\n")


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def run_synth(config: PipelineConfig, strict: bool = False) -> StageResult:
    """Draw a synthetic survey population and write it as a diary CSV."""
    t0 = time.time()
    out = artifact_dir(config, "synth", create=True)
    schema = config.schema()
    samples = synth_population(_grammar(config.synth.grammar), config.synth.n,
                               seed=config.synth.seed)
    save_csv(samples, out / "diaries.csv", schema)
    outputs = [out / "diaries.csv"]
    info = {"samples": len(samples), "grammar": config.synth.grammar}
    if config.finetune.enabled:
        samples_b = synth_population(
            _grammar(config.finetune.grammar), config.finetune.n,
            seed=config.finetune.synth_seed, id_prefix="ft",
        )
        save_csv(samples_b, out / "diaries_b.csv", schema)
        outputs.append(out / "diaries_b.csv")
        info["samples_b"] = len(samples_b)
    return _finish(config, "synth", t0, [], outputs, info)


def run_ingest(config: PipelineConfig, strict: bool = False) -> StageResult:
    """Parse the diary CSV and split it into train/val/test sample files."""
    t0 = time.time()
    src = _input(config, "synth", "diaries.csv", strict)
    out = artifact_dir(config, "ingest", create=True)
    samples = load_csv(src, config.schema())
    tr, va, te = split(samples, config.split_ratios, seed=config.split_seed)
    write_samples(tr, out / "train.jsonl")
    write_samples(va, out / "val.jsonl")
    write_samples(te, out / "test.jsonl")
    outputs = [out / "train.jsonl", out / "val.jsonl", out / "test.jsonl"]
    return _finish(config, "ingest", t0, [src], outputs,
                   {"train": len(tr), "val": len(va), "test": len(te)})


def run_balance(config: PipelineConfig, strict: bool = False) -> StageResult:
    """Rake the training split toward relaxed uniform feature targets and
    resample it with the fitted weights."""
    t0 = time.time()
    src = _input(config, "ingest", "train.jsonl", strict)
    out = artifact_dir(config, "balance", create=True)
    samples = read_samples(src, config.schema())
    result = balance(samples, config.balance)
    export_weights_csv(result.weights, out / "weights.csv")
    n = config.resample_to or len(samples)
    balanced = resample(samples, result.weights, n, seed=config.resample_seed)
    write_samples(balanced, out / "balanced.jsonl")
    _dump_json(out / "balance_log.json", {
        "converged": result.converged,
        "iterations": result.log,
        "targets": {
            f: {"classes": list(d.classes), "shares": list(d.shares)}
            for f, d in result.targets.items()
        },
    })
    outputs = [out / "weights.csv", out / "balanced.jsonl", out / "balance_log.json"]
    return _finish(config, "balance", t0, [src], outputs,
                   {"converged": result.converged, "resampled_to": n})


def _training_inputs(config: PipelineConfig, strict: bool) -> tuple[Path, Path]:
    if config.balance_enabled:
        train_src = _input(config, "balance", "balanced.jsonl", strict)
    else:
        train_src = _input(config, "ingest", "train.jsonl", strict)
    val_src = _input(config, "ingest", "val.jsonl", strict)
    return train_src, val_src


def run_train(config: PipelineConfig, strict: bool = False) -> StageResult:
    """Train the chain generator from scratch and checkpoint the best model."""
    from ..model import init_params  # local import keeps module load light

    t0 = time.time()
    train_src, val_src = _training_inputs(config, strict)
    out = artifact_dir(config, "train", create=True)
    schema = config.schema()
    tr = read_samples(train_src, schema)
    va = read_samples(val_src, schema)
    params = init_params(config.model, seed=config.seed)
    best, log = train(params, tr, va, config.train, config.loss, config.soft)
    save_checkpoint(out / "model.ckpt", best,
                    meta={"stage": "train", "config_hash": config_hash(config)})
    _dump_json(out / "history.json", log)
    outputs = [out / "model.ckpt", out / "history.json"]
    val = min((row["val_total"] for row in log), default=float("nan"))
    return _finish(config, "train", t0, [train_src, val_src], outputs,
                   {"epochs": len(log), "best_val_total": val})


def run_finetune(config: PipelineConfig, strict: bool = False) -> StageResult:
    """Fine-tune the pretrained checkpoint on the second grammar's samples."""
    t0 = time.time()
    if not config.finetune.enabled:
        raise ConfigError("finetune stage is disabled; set [finetune] enabled = true")
    ckpt_src = _input(config, "train", "model.ckpt", strict)
    diaries_b = _input(config, "synth", "diaries_b.csv", strict)
    out = artifact_dir(config, "finetune", create=True)
    schema = config.schema()
    samples = load_csv(diaries_b, schema)
    tr, va, _ = split(samples, config.split_ratios, seed=config.split_seed)
    params, _ = load_checkpoint(ckpt_src)
    tcfg = config.train
    if config.finetune.epochs is not None:
        tcfg = replace(tcfg, epochs=config.finetune.epochs)
    if config.finetune.lr is not None:
        tcfg = replace(tcfg, lr=config.finetune.lr)
    tcfg = replace(tcfg, seed=config.seed + 10)
    best, log = fine_tune(params, tr, va, config.finetune.plan, tcfg,
                          config.loss, config.soft)
    save_checkpoint(out / "model_ft.ckpt", best,
                    meta={"stage": "finetune", "config_hash": config_hash(config)})
    _dump_json(out / "history_ft.json", log)
    outputs = [out / "model_ft.ckpt", out / "history_ft.json"]
    return _finish(config, "finetune", t0, [ckpt_src, diaries_b], outputs,
                   {"epochs": len(log), "train_samples": len(tr)})


def run_generate(config: PipelineConfig, strict: bool = False) -> StageResult:
    """Generate chains for the held-out test profiles from the newest model."""
    t0 = time.time()
    if config.finetune.enabled:
        ckpt_src = _input(config, "finetune", "model_ft.ckpt", strict)
    else:
        ckpt_src = _input(config, "train", "model.ckpt", strict)
    test_src = _input(config, "ingest", "test.jsonl", strict)
    out = artifact_dir(config, "generate", create=True)
    schema = config.schema()
    samples = read_samples(test_src, schema)
    params, _ = load_checkpoint(ckpt_src)
    chains = generate(params, samples, config.sampling)
    ids = [f"{s.household_id}#{s.target_index}" for s in samples]
    _write_chains(out / "chains.jsonl", ids, chains)
    stats = generation_stats(chains)
    _dump_json(out / "generation_stats.json", {
        "n_chains": stats.n_chains,
        "n_valid": stats.n_valid,
        "valid_fraction": stats.valid_fraction,
    })
    outputs = [out / "chains.jsonl", out / "generation_stats.json"]
    return _finish(config, "generate", t0, [ckpt_src, test_src], outputs,
                   {"chains": stats.n_chains, "valid_fraction": round(stats.valid_fraction, 4)})


def run_assign(config: PipelineConfig, strict: bool = False) -> StageResult:
    """Place generated chains on the city: fit reference distributions,
    refine them toward the reference sub-region counts, assign zones, and
    export trajectories plus OD matrices."""
    t0 = time.time()
    chains_src = _input(config, "generate", "chains.jsonl", strict)
    test_src = _input(config, "ingest", "test.jsonl", strict)
    out = artifact_dir(config, "assign", create=True)
    schema = config.schema()

    if config.assign.zone_file is not None:
        zone_map = ala_mod.read_zone_csv(config.assign.zone_file)
    else:
        zone_map = city_mod.make_city(seed=config.assign.city_seed)
    ala_mod.write_zone_csv(out / "zones.csv", zone_map)

    test_samples = read_samples(test_src, schema)
    ids, gen_chains = _read_chains(chains_src)

    # The city's gravity process over the *true* held-out chains supplies
    # the fitting data and the per-sub-region count targets.
    truth_plans = city_mod.plans_from_samples(
        test_samples, zone_map, seed=config.assign.home_seed
    )
    reference = city_mod.reference_assign(
        truth_plans, zone_map, seed=config.assign.reference_seed
    )
    dists = ala_mod.fit_distributions(
        reference, zone_map,
        n_distance_bins=config.assign.ala.n_distance_bins,
        n_angle_bins=config.assign.ala.n_angle_bins,
    )
    targets = ala_mod.sub_region_counts(reference, zone_map)

    homes = {p.agent_id: p.home_zone for p in truth_plans}
    plans = [
        ala_mod.AgentPlan(agent_id=i, chain=c, home_zone=homes[i])
        for i, c in zip(ids, gen_chains)
        if c and not validate_chain(c)
    ]
    skipped = len(gen_chains) - len(plans)

    tuned, trace = ala_mod.refine(plans, targets, dists, zone_map, config.assign.ala)
    trajectories = ala_mod.assign_population(plans, tuned, zone_map, config.assign.ala)

    ala_mod.write_trajectories(out / "trajectories.jsonl", trajectories)
    for aggregation, name in (("zone", "od_zone.csv"), ("sub_region", "od_sub_region.csv")):
        od = ala_mod.build_od(trajectories, zone_map, aggregation)
        ala_mod.write_od_csv(out / name, od, ala_mod.od_labels(zone_map, aggregation))
    od_ref = ala_mod.build_od(reference, zone_map, "sub_region")
    ala_mod.write_od_csv(out / "od_reference.csv", od_ref,
                         ala_mod.od_labels(zone_map, "sub_region"))
    _dump_json(out / "refine_trace.json", trace)

    outputs = [out / "zones.csv", out / "trajectories.jsonl", out / "od_zone.csv",
               out / "od_sub_region.csv", out / "od_reference.csv",
               out / "refine_trace.json"]
    best_err = min((t["max_rel_error"] for t in trace), default=0.0)
    return _finish(config, "assign", t0, [chains_src, test_src], outputs,
                   {"agents": len(plans), "skipped_invalid": skipped,
                    "refine_iterations": len(trace),
                    "best_max_rel_error": round(best_err, 4)})


def _read_od_csv(path: Path) -> np.ndarray:
    rows = []
    with path.open() as fh:
        next(fh)
        for line in fh:
            if line.strip():
                rows.append([int(v) for v in line.strip().split(",")[1:]])
    return np.array(rows, dtype=np.int64)


def run_evaluate(config: PipelineConfig, strict: bool = False) -> StageResult:
    """Compare generated chains against the held-out truth; attach OD
    metrics when the assign stage has run."""
    t0 = time.time()
    chains_src = _input(config, "generate", "chains.jsonl", strict)
    test_src = _input(config, "ingest", "test.jsonl", strict)
    out = artifact_dir(config, "evaluate", create=True)
    schema = config.schema()
    _, gen_chains = _read_chains(chains_src)
    truth = [s.chain for s in read_samples(test_src, schema)]
    gen_chains = [c for c in gen_chains if c]
    inputs = [chains_src, test_src]

    gen_od = truth_od = None
    if config.evaluate_od:
        try:
            od_src = _input(config, "assign", "od_sub_region.csv", strict)
            ref_src = _input(config, "assign", "od_reference.csv", strict)
        except ConfigError:
            if strict:
                raise
            logger.warning("assign artifacts not found; skipping OD metrics")
        else:
            gen_od = _read_od_csv(od_src)
            truth_od = _read_od_csv(ref_src)
            inputs += [od_src, ref_src]

    rep = report(gen_chains, truth, gen_od, truth_od)
    (out / "report.json").write_text(rep.to_json() + "\n")
    (out / "report.csv").write_text(rep.csv_header() + "\n" + rep.to_csv_row() + "\n")
    outputs = [out / "report.json", out / "report.csv"]
    info = {k: round(v, 4) for k, v in (
        ("jsd_length", rep.jsd_length), ("jsd_duration", rep.jsd_duration),
        ("jsd_start", rep.jsd_start), ("jsd_end", rep.jsd_end),
        ("jsd_type", rep.jsd_type), ("edge_completeness", rep.edge_completeness),
    )}
    if rep.od_cosine is not None:
        info["od_cosine"] = round(rep.od_cosine, 4)
    return _finish(config, "evaluate", t0, inputs, outputs, info)


_STAGE_FNS: dict[str, Callable[[PipelineConfig, bool], StageResult]] = {
    "synth": run_synth,
    "ingest": run_ingest,
    "balance": run_balance,
    "train": run_train,
    "finetune": run_finetune,
    "generate": run_generate,
    "assign": run_assign,
    "evaluate": run_evaluate,
}


def run_stage(name: str, config: PipelineConfig, strict: bool = False) -> StageResult:
    try:
        fn = _STAGE_FNS[name]
    except KeyError:
        raise ConfigError(f"unknown stage {name!r}; expected one of {STAGES}") from None
    return fn(config, strict)


def run_pipeline(config: PipelineConfig, strict: bool = False) -> list[StageResult]:
    """All stages in dependency order; finetune only when enabled, balance
    skipped (not merely unused) when disabled."""
    order = ["synth", "ingest"]
    if config.balance_enabled:
        order.append("balance")
    order.append("train")
    if config.finetune.enabled:
        order.append("finetune")
    order += ["generate", "assign", "evaluate"]
    return [run_stage(name, config, strict) for name in order]
