"""Encoder attention export for interpretability.

Runs one sample through the encoder (optionally with its activity chain
as a prefix) and returns the attention weights of one layer with
human-readable position labels.  Rows over attended keys are
row-stochastic; masked keys receive exactly zero weight.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..ingest import EncodedSample
from .network import _position_labels, encode, make_batch
from .params import ModelParams


@dataclass(frozen=True)
class AttentionExport:
    layer: int
    labels: list[str]          # one per encoder position
    attended: np.ndarray       # (L,) bool, False = masked key
    weights: np.ndarray        # (H, L, L) attention probabilities

    @property
    def n_heads(self) -> int:
        return self.weights.shape[0]

    def head(self, h: int) -> np.ndarray:
        return self.weights[h]

    def mean_heads(self) -> np.ndarray:
        return self.weights.mean(axis=0)

    def to_json(self) -> str:
        return json.dumps({
            "layer": self.layer,
            "labels": self.labels,
            "attended": [bool(v) for v in self.attended],
            "weights": [h.tolist() for h in self.weights],
        })

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json())
        return path


def export_attention(
    params: ModelParams,
    sample: EncodedSample,
    layer: int = 0,
    with_chain: bool = True,
    attr_names: list[str] | None = None,
) -> AttentionExport:
    """Attention map of one encoder layer for a single sample.

    The sample's member blocks are rotated target-first, matching how the
    model consumes them, so labels name block 0 "target".  attr_names
    (e.g. schema.names) replaces the generic attrN labels.
    """
    cfg = params.config
    if not 0 <= layer < cfg.n_encoder_layers:
        raise ConfigError(f"layer must be in 0..{cfg.n_encoder_layers - 1}")
    batch = make_batch([sample], cfg, pack=False, with_prefix=with_chain)
    _, attn, _ = encode(params, batch, collect_attn=True)
    weights = np.asarray(attn[layer][0], dtype=np.float64)  # (H, L, L)
    prefix_len = 0 if batch.prefix_phys is None else int(batch.prefix_phys.size)
    labels = _position_labels(batch.profiles.shape[1], prefix_len)
    if attr_names is not None:
        for a, name in enumerate(attr_names):
            tag = f"attr{a}"
            labels = [
                lb.replace(tag, name) if lb.endswith(":" + tag) else lb
                for lb in labels
            ]
    return AttentionExport(
        layer=layer,
        labels=labels,
        attended=batch.enc_attend[0].copy(),
        weights=weights,
    )
