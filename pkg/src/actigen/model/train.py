"""Training loop: Adam with per-epoch learning-rate decay and early stop.

Batches are bucketed by household member count so the packed encoder
length stays minimal; bucket composition, batch order, and dropout all
draw from one seeded generator, which makes training bit-reproducible.
Frozen parameter groups are skipped entirely by the optimizer, so their
weights stay bit-identical.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import TrainError
from ..ingest import EncodedSample
from .config import LossWeights, SoftLabelConfig, TrainConfig
from .losses import total_loss_grad
from .network import Batch, backward_batch, forward_batch, make_batch
from .params import ModelParams, group_of


class Adam:
    """Adaptive-moment optimizer over the flat parameter dict."""

    def __init__(self, params: ModelParams, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.tensors.items()}
        self.t = 0

    def step(self, params: ModelParams, grads: dict[str, np.ndarray],
             lr: float, frozen: frozenset[str] = frozenset()) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1 ** self.t
        bc2 = 1.0 - cfg.beta2 ** self.t
        for name, theta in params.tensors.items():
            if group_of(name) in frozen:
                continue
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * (g * g)
            theta -= lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float,
                   frozen: frozenset[str] = frozenset()) -> float:
    """Scale trainable gradients to a global norm cap; returns the norm."""
    sq = 0.0
    for name, g in grads.items():
        if group_of(name) in frozen:
            continue
        sq += float((g * g).sum())
    norm = float(np.sqrt(sq))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for name, g in grads.items():
            if group_of(name) not in frozen:
                g *= scale
    return norm


def _epoch_batches(
    samples: Sequence[EncodedSample],
    batch_size: int,
    rng: np.random.Generator,
    bucket: bool,
) -> list[list[int]]:
    """Batch index lists for one epoch, shuffled deterministically."""
    n = len(samples)
    batches: list[list[int]] = []
    if bucket:
        groups: dict[int, list[int]] = {}
        for i, s in enumerate(samples):
            groups.setdefault(s.n_members, []).append(i)
        for m in sorted(groups):
            idx = np.asarray(groups[m])
            idx = idx[rng.permutation(len(idx))]
            for k in range(0, len(idx), batch_size):
                batches.append([int(i) for i in idx[k:k + batch_size]])
    else:
        idx = rng.permutation(n)
        for k in range(0, n, batch_size):
            batches.append([int(i) for i in idx[k:k + batch_size]])
    order = rng.permutation(len(batches))
    return [batches[int(i)] for i in order]


def _eval_batches(samples: Sequence[EncodedSample], batch_size: int) -> list[list[int]]:
    groups: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        groups.setdefault(s.n_members, []).append(i)
    batches = []
    for m in sorted(groups):
        idx = groups[m]
        for k in range(0, len(idx), batch_size):
            batches.append(idx[k:k + batch_size])
    return batches


def evaluate_loss(
    params: ModelParams,
    samples: Sequence[EncodedSample],
    weights: LossWeights,
    soft: SoftLabelConfig,
    batch_size: int = 512,
    prebuilt: list[Batch] | None = None,
) -> float:
    """Mean total loss (no dropout), weighted by valid positions."""
    if prebuilt is None:
        prebuilt = [make_batch([samples[i] for i in idx], params.config)
                    for idx in _eval_batches(samples, batch_size)]
    total = 0.0
    n = 0
    for batch in prebuilt:
        fwd = forward_batch(params, batch)
        loss, _, _, _, _ = total_loss_grad(
            fwd.logits_type, fwd.logits_start, fwd.logits_end,
            batch.tgt_type, batch.tgt_start, batch.tgt_end,
            batch.type_mask, batch.time_mask, weights, soft)
        k = int(batch.type_mask.sum())
        total += loss * k
        n += k
    return total / max(n, 1)


FreezeSchedule = Callable[[int], frozenset]


def train(
    params: ModelParams,
    train_samples: Sequence[EncodedSample],
    val_samples: Sequence[EncodedSample],
    cfg: TrainConfig | None = None,
    weights: LossWeights | None = None,
    soft: SoftLabelConfig | None = None,
    frozen_groups: FreezeSchedule | None = None,
) -> tuple[ModelParams, list[dict]]:
    """Train and return (best-validation parameters, epoch log).

    The learning rate is cfg.lr * cfg.lr_decay ** epoch.  Early stopping
    restores the best-validation parameters after cfg.patience epochs
    without improvement.  frozen_groups maps the epoch number to the set
    of parameter groups excluded from updates that epoch.
    """
    cfg = cfg or TrainConfig()
    weights = weights or LossWeights()
    soft = soft or SoftLabelConfig()
    if not train_samples:
        raise TrainError("no training samples")
    if not val_samples:
        raise TrainError("no validation samples")

    dtype = np.float32 if cfg.dtype == "float32" else np.float64
    work = params.astype(dtype)
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(work, cfg)

    val_batches = [make_batch([val_samples[i] for i in idx], work.config)
                   for idx in _eval_batches(val_samples, cfg.batch_size)]

    log: list[dict] = []
    best_val = np.inf
    best = work.copy()
    bad = 0
    for epoch in range(cfg.epochs):
        lr = cfg.lr * cfg.lr_decay ** epoch
        frozen = frozenset(frozen_groups(epoch)) if frozen_groups else frozenset()
        sums = {"total": 0.0, "type": 0.0, "start": 0.0, "end": 0.0,
                "order": 0.0, "seq": 0.0}
        n_batches = 0
        for idx in _epoch_batches(train_samples, cfg.batch_size, rng, cfg.bucket_by_members):
            batch = make_batch([train_samples[i] for i in idx], work.config)
            fwd = forward_batch(work, batch, train=True, rng=rng)
            loss, parts, dt, ds, de = total_loss_grad(
                fwd.logits_type, fwd.logits_start, fwd.logits_end,
                batch.tgt_type, batch.tgt_start, batch.tgt_end,
                batch.type_mask, batch.time_mask, weights, soft)
            if not np.isfinite(loss):
                raise TrainError(f"loss diverged at epoch {epoch}")
            grads = backward_batch(work, batch, fwd, dt, ds, de)
            if cfg.clip_norm is not None:
                clip_gradients(grads, cfg.clip_norm, frozen)
            opt.step(work, grads, lr, frozen)
            sums["total"] += loss
            for k, v in parts.items():
                sums[k] += v
            n_batches += 1

        val = evaluate_loss(work, val_samples, weights, soft,
                            cfg.batch_size, prebuilt=val_batches)
        if not np.isfinite(val):
            raise TrainError(f"validation loss diverged at epoch {epoch}")
        improved = val < best_val - 1e-9
        if improved:
            best_val = val
            best = work.copy()
            bad = 0
        else:
            bad += 1
        log.append({
            "epoch": epoch,
            "lr": lr,
            "train_total": sums["total"] / n_batches,
            "train_type": sums["type"] / n_batches,
            "train_start": sums["start"] / n_batches,
            "train_end": sums["end"] / n_batches,
            "train_order": sums["order"] / n_batches,
            "train_seq": sums["seq"] / n_batches,
            "val_total": val,
            "best": improved,
        })
        if bad >= cfg.patience:
            break
    return best, log
