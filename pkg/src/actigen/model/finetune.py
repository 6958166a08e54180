"""Fine-tuning: staged unfreezing and an input adapter for new schemata.

A FineTunePlan names the parameter groups that train from epoch 0 and
the epochs at which further groups unfreeze ("all" unfreezes everything).
When the target data uses different attribute cardinalities, add_adapter
re-initializes the attribute embeddings and their shared projection while
every other tensor is carried over from the source model.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ConfigError
from ..ingest import EncodedSample
from .config import FineTunePlan, LossWeights, ModelConfig, SoftLabelConfig, TrainConfig
from .params import GROUPS, ModelParams, group_of, init_params
from .train import train

_ADAPTER_GROUPS = ("attr_embed", "attr_proj")


def _check_groups(names, where: str) -> None:
    for g in names:
        if g != "all" and g not in GROUPS:
            raise ConfigError(f"unknown parameter group {g!r} in {where}")


def build_schedule(plan: FineTunePlan):
    """Epoch -> frozenset of frozen groups, from the plan's unfreeze map."""
    _check_groups(plan.initial_groups, "initial_groups")
    for epoch, names in plan.unfreeze_at.items():
        if not isinstance(epoch, int) or epoch < 0:
            raise ConfigError("unfreeze_at keys must be non-negative epochs")
        _check_groups(names, f"unfreeze_at[{epoch}]")

    def frozen(epoch: int) -> frozenset:
        allowed = set(plan.initial_groups)
        for at, names in plan.unfreeze_at.items():
            if at <= epoch:
                allowed.update(names)
        if "all" in allowed:
            return frozenset()
        return frozenset(GROUPS) - allowed

    return frozen


def add_adapter(params: ModelParams, new_config: ModelConfig, seed: int = 0) -> ModelParams:
    """Re-initialize the attribute input pathway for a new schema.

    Every tensor outside attr_embed/attr_proj must keep its shape, so the
    new config may only change attribute cardinalities and dummy codes.
    """
    fresh = init_params(new_config, seed=seed)
    tensors: dict[str, np.ndarray] = {}
    for name, arr in fresh.tensors.items():
        if group_of(name) in _ADAPTER_GROUPS and name != "attr_embed.weekday":
            tensors[name] = arr
        else:
            old = params.tensors.get(name)
            if old is None or old.shape != arr.shape:
                raise ConfigError(
                    f"adapter can only change the attribute pathway; "
                    f"tensor {name} differs between configurations")
            tensors[name] = old.copy()
    return ModelParams(new_config, tensors)


def fine_tune(
    params: ModelParams,
    train_samples: Sequence[EncodedSample],
    val_samples: Sequence[EncodedSample],
    plan: FineTunePlan | None = None,
    cfg: TrainConfig | None = None,
    weights: LossWeights | None = None,
    soft: SoftLabelConfig | None = None,
    new_config: ModelConfig | None = None,
) -> tuple[ModelParams, list[dict]]:
    """Adapt a trained model to new data under a freeze schedule.

    new_config switches the attribute schema; it requires plan.add_adapter
    when cardinalities differ, because the pretrained embeddings cannot
    index a different vocabulary.
    """
    plan = plan or FineTunePlan()
    base = params
    if new_config is not None:
        same = (new_config.attr_cardinalities == params.config.attr_cardinalities
                and new_config.attr_dummy_codes == params.config.attr_dummy_codes)
        if not same and not plan.add_adapter:
            raise ConfigError(
                "target schema has different attribute cardinalities; "
                "set add_adapter=True to re-initialize the input pathway")
        if plan.add_adapter:
            base = add_adapter(params, new_config, plan.adapter_seed)
    elif plan.add_adapter:
        base = add_adapter(params, params.config, plan.adapter_seed)
    return train(base, train_samples, val_samples, cfg, weights, soft,
                 frozen_groups=build_schedule(plan))
