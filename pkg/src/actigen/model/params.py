"""Parameter container, initialization, and group bookkeeping.

Parameters live in a flat name -> ndarray dict.  Names are hierarchical
(e.g. "enc.0.attn.Wq") and map onto seven logical groups used by the
optimizer's freeze/unfreeze machinery:

  attr_embed  per-attribute embedding tables + weekday table
  attr_proj   shared projection of attribute embeddings into d_model
  act_embed   type/start/end embedding tables + their combiner
  sep         the five learnable member delimiters
  encoder     all encoder layers
  decoder     all decoder layers
  heads       type/start/end output heads
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..schema import N_ATTRS
from .config import (
    ModelConfig,
    SEP_COUNT,
    TIME_LOGITS,
    TIME_VOCAB,
    TYPE_LOGITS,
    TYPE_VOCAB,
)

GROUPS = ("attr_embed", "attr_proj", "act_embed", "sep", "encoder", "decoder", "heads")


def group_of(name: str) -> str:
    if name.startswith("attr_embed."):
        return "attr_embed"
    if name.startswith("attr_proj."):
        return "attr_proj"
    if name.startswith("act_embed."):
        return "act_embed"
    if name == "sep":
        return "sep"
    if name.startswith("enc."):
        return "encoder"
    if name.startswith("dec."):
        return "decoder"
    if name.startswith("head."):
        return "heads"
    raise KeyError(f"parameter {name!r} belongs to no group")


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.config, {k: v.astype(dtype) for k, v in self.tensors.items()})

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    def names_in_group(self, group: str) -> list[str]:
        if group not in GROUPS:
            raise ConfigError(f"unknown parameter group {group!r}")
        return [n for n in self.tensors if group_of(n) == group]

    def n_parameters(self) -> int:
        return sum(int(v.size) for v in self.tensors.values())


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _attention_block(rng, prefix: str, d: int, tensors: dict) -> None:
    for w in ("Wq", "Wk", "Wv", "Wo"):
        tensors[f"{prefix}.{w}"] = _glorot(rng, d, d)
    # no key bias: a per-query constant score shift cancels in softmax,
    # so it would be an unidentifiable direction with zero gradient
    for b in ("bq", "bv", "bo"):
        tensors[f"{prefix}.{b}"] = np.zeros(d)


def _layernorm(prefix: str, d: int, tensors: dict) -> None:
    tensors[f"{prefix}.g"] = np.ones(d)
    tensors[f"{prefix}.b"] = np.zeros(d)


def _ff_block(rng, prefix: str, d: int, d_ff: int, tensors: dict) -> None:
    tensors[f"{prefix}.W1"] = _glorot(rng, d, d_ff)
    tensors[f"{prefix}.b1"] = np.zeros(d_ff)
    tensors[f"{prefix}.W2"] = _glorot(rng, d_ff, d)
    tensors[f"{prefix}.b2"] = np.zeros(d)


EMBED_SCALE = 0.02


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Fresh float64 parameters; embeddings N(0, 0.02), linears Glorot."""
    rng = np.random.default_rng(seed)
    d, de = config.d_model, config.de
    t: dict[str, np.ndarray] = {}

    for i, card in enumerate(config.attr_cardinalities):
        t[f"attr_embed.{i}"] = rng.normal(0.0, EMBED_SCALE, size=(card, de))
    t["attr_embed.weekday"] = rng.normal(0.0, EMBED_SCALE, size=(2, d))
    t["attr_proj.W"] = _glorot(rng, de, d)
    t["attr_proj.b"] = np.zeros(d)

    t["act_embed.type"] = rng.normal(0.0, EMBED_SCALE, size=(TYPE_VOCAB, de))
    t["act_embed.start"] = rng.normal(0.0, EMBED_SCALE, size=(TIME_VOCAB, de))
    t["act_embed.end"] = rng.normal(0.0, EMBED_SCALE, size=(TIME_VOCAB, de))
    t["act_embed.W"] = _glorot(rng, 3 * de, d)
    t["act_embed.b"] = np.zeros(d)

    t["sep"] = rng.normal(0.0, EMBED_SCALE, size=(SEP_COUNT, d))

    for l in range(config.n_encoder_layers):
        _attention_block(rng, f"enc.{l}.attn", d, t)
        _layernorm(f"enc.{l}.ln1", d, t)
        _ff_block(rng, f"enc.{l}.ff", d, config.d_ff, t)
        _layernorm(f"enc.{l}.ln2", d, t)

    for l in range(config.n_decoder_layers):
        _attention_block(rng, f"dec.{l}.self", d, t)
        _layernorm(f"dec.{l}.ln1", d, t)
        _attention_block(rng, f"dec.{l}.cross", d, t)
        _layernorm(f"dec.{l}.ln2", d, t)
        _ff_block(rng, f"dec.{l}.ff", d, config.d_ff, t)
        _layernorm(f"dec.{l}.ln3", d, t)

    t["head.type.W"] = _glorot(rng, d, TYPE_LOGITS)
    t["head.type.b"] = np.zeros(TYPE_LOGITS)
    t["head.start.W"] = _glorot(rng, d, TIME_LOGITS)
    t["head.start.b"] = np.zeros(TIME_LOGITS)
    t["head.end.W"] = _glorot(rng, d, TIME_LOGITS)
    t["head.end.b"] = np.zeros(TIME_LOGITS)

    for name in t:
        group_of(name)  # every tensor must belong to a group
    assert len(config.attr_dummy_codes) == N_ATTRS
    return ModelParams(config, t)


def sinusoidal_encoding(length: int, d: int, dtype=np.float64) -> np.ndarray:
    """Fixed sin/cos positional table of shape (length, d)."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(d, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * (i // 2)) / d)
    enc = np.empty((length, d), dtype=np.float64)
    enc[:, 0::2] = np.sin(angle[:, 0::2])
    enc[:, 1::2] = np.cos(angle[:, 1::2])
    return enc.astype(dtype)
