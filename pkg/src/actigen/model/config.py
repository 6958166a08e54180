"""Model, loss, and training configuration containers."""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Sequence

from ..core import MAX_HOUSEHOLD_MEMBERS, N_ACTIVITY_TYPES, N_SLOTS
from ..errors import ConfigError
from ..schema import DatasetSchema, N_ATTRS

# Type vocabulary for the decoder: PAD 0, activity codes 1..15, SOS, EOS.
TYPE_PAD = 0
TYPE_SOS = N_ACTIVITY_TYPES + 1  # 16
TYPE_EOS = N_ACTIVITY_TYPES + 2  # 17
TYPE_VOCAB = N_ACTIVITY_TYPES + 3  # embedding rows
# The type head scores the 15 real codes plus EOS; SOS/PAD are never emitted.
TYPE_LOGITS = N_ACTIVITY_TYPES + 1
EOS_INDEX = TYPE_LOGITS - 1
# Slot vocabulary: 0 reserved for SOS/PAD steps, then slots 1..96.
TIME_VOCAB = N_SLOTS + 1
TIME_LOGITS = N_SLOTS

SEP_COUNT = MAX_HOUSEHOLD_MEMBERS
BLOCK = N_ATTRS + 1  # attribute positions per member plus its SEP
FULL_ENC_LEN = MAX_HOUSEHOLD_MEMBERS * N_ATTRS + SEP_COUNT  # 135


@dataclass(frozen=True)
class ModelConfig:
    """Architecture plus the attribute vocabulary it embeds."""

    attr_cardinalities: tuple[int, ...]
    attr_dummy_codes: tuple[int, ...]
    d_model: int = 64
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    d_ff: int = 128
    embed_dim: int | None = None
    dropout: float = 0.1
    max_len: int = 16

    def __post_init__(self) -> None:
        if len(self.attr_cardinalities) != N_ATTRS:
            raise ConfigError(f"expected {N_ATTRS} attribute cardinalities")
        if len(self.attr_dummy_codes) != N_ATTRS:
            raise ConfigError(f"expected {N_ATTRS} dummy codes")
        for card, dummy in zip(self.attr_cardinalities, self.attr_dummy_codes):
            if card < 2 or not 0 <= dummy < card:
                raise ConfigError("bad attribute cardinality or dummy code")
        if self.d_model % self.n_heads != 0:
            raise ConfigError("d_model must be divisible by n_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.max_len < 1:
            raise ConfigError("max_len must be >= 1")
        if self.embed_dim is not None and self.embed_dim < 1:
            raise ConfigError("embed_dim must be positive")

    @property
    def de(self) -> int:
        return self.embed_dim if self.embed_dim is not None else self.d_model

    @property
    def max_seq(self) -> int:
        """Longest sequence either stream can see (encoder with full prefix)."""
        return FULL_ENC_LEN + self.max_len + 1

    @classmethod
    def from_schema(cls, schema: DatasetSchema, **overrides) -> "ModelConfig":
        return cls(
            attr_cardinalities=schema.cardinalities,
            attr_dummy_codes=schema.dummy_codes,
            **overrides,
        )

    @classmethod
    def desk(cls, schema: DatasetSchema, **overrides) -> "ModelConfig":
        """The small configuration used throughout the test pipeline."""
        defaults = dict(d_model=64, n_heads=4, n_encoder_layers=2,
                        n_decoder_layers=2, d_ff=128, dropout=0.1)
        defaults.update(overrides)
        return cls.from_schema(schema, **defaults)

    @classmethod
    def tiny(cls, schema: DatasetSchema, **overrides) -> "ModelConfig":
        """Miniature configuration for unit tests and gradient checks."""
        defaults = dict(d_model=16, n_heads=2, n_encoder_layers=1,
                        n_decoder_layers=1, d_ff=24, dropout=0.0, max_len=8)
        defaults.update(overrides)
        return cls.from_schema(schema, **defaults)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["attr_cardinalities"] = list(self.attr_cardinalities)
        d["attr_dummy_codes"] = list(self.attr_dummy_codes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["attr_cardinalities"] = tuple(d["attr_cardinalities"])
        d["attr_dummy_codes"] = tuple(d["attr_dummy_codes"])
        return cls(**d)


@dataclass(frozen=True)
class LossWeights:
    """Weights of the five loss terms in the training objective."""

    w_type: float = 1.0
    w_start: float = 1.0
    w_end: float = 1.0
    w_order: float = 0.1
    w_seq: float = 0.1

    def __post_init__(self) -> None:
        vals = (self.w_type, self.w_start, self.w_end, self.w_order, self.w_seq)
        if any(v < 0 for v in vals):
            raise ConfigError("loss weights must be non-negative")
        if all(v == 0 for v in vals):
            raise ConfigError("at least one loss weight must be positive")

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.w_type, self.w_start, self.w_end, self.w_order, self.w_seq)


@dataclass(frozen=True)
class SoftLabelConfig:
    """Soft time labels: full weight on the true slot, side weight on
    neighbors up to side_steps away (clipped at the slot range, no wrap)."""

    main_weight: float = 1.0
    side_weight: float = 0.1
    side_steps: int = 2
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.main_weight <= 0:
            raise ConfigError("main_weight must be positive")
        if self.side_weight < 0 or self.side_weight > self.main_weight:
            raise ConfigError("side_weight must satisfy 0 <= side <= main")
        if self.side_steps < 0:
            raise ConfigError("side_steps must be >= 0")
        if self.eps < 0:
            raise ConfigError("eps must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.005
    lr_decay: float = 0.95
    epochs: int = 150
    batch_size: int = 512
    patience: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_norm: float | None = 5.0
    dtype: str = "float64"
    seed: int = 0
    bucket_by_members: bool = True

    def __post_init__(self) -> None:
        if self.lr <= 0 or not 0 < self.lr_decay <= 1:
            raise ConfigError("bad learning rate settings")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigError("adam betas must be in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigError("clip_norm must be positive or None")


@dataclass(frozen=True)
class SamplingConfig:
    temperature: float = 1.0
    max_len: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_len is not None and self.max_len < 1:
            raise ConfigError("max_len must be >= 1")


@dataclass(frozen=True)
class FineTunePlan:
    """Staged fine-tuning: which groups train from the start, which
    unfreeze later, and whether to re-initialize the input side for a new
    attribute schema."""

    initial_groups: tuple[str, ...] = ("decoder", "heads")
    unfreeze_at: dict = field(default_factory=dict)  # epoch -> tuple of groups
    add_adapter: bool = False
    adapter_seed: int = 0
