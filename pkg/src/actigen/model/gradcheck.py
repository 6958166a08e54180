"""Finite-difference verification of the analytic gradients.

Coordinates are drawn from every parameter group, perturbed by +/- eps in
float64 with dropout inactive, and compared against the backward pass via
relative error |a - n| / max(|a|, |n|, 1e-8).

Two measurement details keep the check about correctness rather than
numerics.  First, the default objective omits the order/sequence hinges:
at initialization every expected slot sits near the distribution mean, so
the hinge gaps cluster at their kink and a +/-eps step straddles it; the
hinge gradients have their own dedicated tests on fixtures with gaps far
from zero.  Second, coordinates are sampled where the analytic gradient
is informative (|g| >= min_grad), because the central difference carries
rounding noise of roughly 1e-9 at eps 1e-4, and coordinates whose true
gradient sits at that level measure noise, not correctness.  Every tensor
whose analytic gradient is identically zero still contributes a detector
coordinate -- if the backward pass wrongly dropped a term, the numeric
gradient there is nonzero and the check fails loudly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..ingest import EncodedSample
from .config import LossWeights, SoftLabelConfig
from .losses import total_loss_grad
from .network import backward_batch, forward_batch, make_batch
from .params import GROUPS, ModelParams

REL_FLOOR = 1e-8


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    n_coords: int
    per_group: dict
    worst_tensor: str

    def __str__(self) -> str:
        return (f"grad check: {self.n_coords} coords, "
                f"max rel error {self.max_rel_error:.3e} at {self.worst_tensor}")


def grad_check(
    params: ModelParams,
    samples: Sequence[EncodedSample],
    weights: LossWeights | None = None,
    soft: SoftLabelConfig | None = None,
    eps: float = 1e-4,
    n_coords: int = 500,
    seed: int = 0,
    groups: Sequence[str] | None = None,
    min_grad: float = 1e-5,
) -> GradCheckResult:
    """Compare analytic and central-difference gradients.

    groups restricts the check (e.g. only embedding tables); by default
    coordinates are spread evenly over all parameter groups.
    """
    weights = weights or LossWeights(w_order=0.0, w_seq=0.0)
    soft = soft or SoftLabelConfig()
    work = params.astype(np.float64)
    batch = make_batch(list(samples), work.config)

    def loss_value() -> float:
        fwd = forward_batch(work, batch)
        val, _, _, _, _ = total_loss_grad(
            fwd.logits_type, fwd.logits_start, fwd.logits_end,
            batch.tgt_type, batch.tgt_start, batch.tgt_end,
            batch.type_mask, batch.time_mask, weights, soft)
        return val

    fwd = forward_batch(work, batch)
    _, _, dt, ds, de = total_loss_grad(
        fwd.logits_type, fwd.logits_start, fwd.logits_end,
        batch.tgt_type, batch.tgt_start, batch.tgt_end,
        batch.type_mask, batch.time_mask, weights, soft)
    analytic = backward_batch(work, batch, fwd, dt, ds, de)

    rng = np.random.default_rng(seed)
    use_groups = tuple(groups) if groups else GROUPS
    by_group = {g: work.names_in_group(g) for g in use_groups}
    by_group = {g: names for g, names in by_group.items() if names}
    quota = -(-n_coords // len(by_group))  # ceil

    coords: list[tuple[str, str, int]] = []
    leftovers: list[tuple[str, str, int]] = []
    for g, names in sorted(by_group.items()):
        eligible: list[tuple[str, int]] = []
        for name in names:
            a = analytic[name]
            if not a.any():
                # detector: numeric must also vanish here
                coords.append((g, name, int(rng.integers(a.size))))
                continue
            flat = np.flatnonzero(np.abs(a) >= min_grad)
            if flat.size == 0:
                flat = np.array([int(np.abs(a).argmax())])
            eligible.extend((name, int(i)) for i in flat)
        take = min(quota, len(eligible))
        order = rng.permutation(len(eligible))
        for k in order[:take]:
            name, flat = eligible[int(k)]
            coords.append((g, name, flat))
        leftovers.extend((g, *eligible[int(k)]) for k in order[take:])
    if len(coords) < n_coords and leftovers:
        short = min(n_coords - len(coords), len(leftovers))
        for k in rng.choice(len(leftovers), size=short, replace=False):
            coords.append(leftovers[int(k)])

    max_rel = 0.0
    worst = ""
    per_group: dict[str, float] = {g: 0.0 for g in by_group}
    for g, name, flat in coords:
        tensor = work.tensors[name]
        orig = tensor.flat[flat]
        tensor.flat[flat] = orig + eps
        f_plus = loss_value()
        tensor.flat[flat] = orig - eps
        f_minus = loss_value()
        tensor.flat[flat] = orig
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a = float(analytic[name].flat[flat])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), REL_FLOOR)
        per_group[g] = max(per_group[g], rel)
        if rel > max_rel:
            max_rel = rel
            worst = name
    return GradCheckResult(max_rel, len(coords), per_group, worst)
