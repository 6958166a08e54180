"""Transformer encoder-decoder for activity chain synthesis."""
from .attention import AttentionExport, export_attention
from .checkpoint import (
    checkpoint_bytes,
    load_checkpoint,
    parse_checkpoint,
    save_checkpoint,
)
from .config import (
    EOS_INDEX,
    FULL_ENC_LEN,
    FineTunePlan,
    LossWeights,
    ModelConfig,
    SamplingConfig,
    SoftLabelConfig,
    TIME_LOGITS,
    TIME_VOCAB,
    TYPE_EOS,
    TYPE_LOGITS,
    TYPE_PAD,
    TYPE_SOS,
    TYPE_VOCAB,
    TrainConfig,
)
from .finetune import add_adapter, build_schedule, fine_tune
from .generate import generate, generation_stats, profile_sample
from .gradcheck import GradCheckResult, grad_check
from .losses import (
    expected_slot,
    loss_ce,
    loss_order_grad,
    loss_seq_grad,
    loss_soft,
    total_loss,
    total_loss_grad,
)
from .network import (
    Batch,
    ForwardResult,
    backward_batch,
    build_encoder_input,
    decode,
    encode,
    forward,
    forward_batch,
    make_batch,
    make_target_first,
)
from .params import GROUPS, ModelParams, group_of, init_params, sinusoidal_encoding
from .train import Adam, clip_gradients, evaluate_loss, train

__all__ = [
    "Adam",
    "AttentionExport",
    "Batch",
    "EOS_INDEX",
    "FULL_ENC_LEN",
    "FineTunePlan",
    "ForwardResult",
    "GROUPS",
    "GradCheckResult",
    "LossWeights",
    "ModelConfig",
    "ModelParams",
    "SamplingConfig",
    "SoftLabelConfig",
    "TIME_LOGITS",
    "TIME_VOCAB",
    "TYPE_EOS",
    "TYPE_LOGITS",
    "TYPE_PAD",
    "TYPE_SOS",
    "TYPE_VOCAB",
    "TrainConfig",
    "add_adapter",
    "backward_batch",
    "build_encoder_input",
    "build_schedule",
    "checkpoint_bytes",
    "clip_gradients",
    "decode",
    "encode",
    "evaluate_loss",
    "expected_slot",
    "export_attention",
    "fine_tune",
    "forward",
    "forward_batch",
    "generate",
    "generation_stats",
    "grad_check",
    "group_of",
    "init_params",
    "load_checkpoint",
    "loss_ce",
    "loss_order_grad",
    "loss_seq_grad",
    "loss_soft",
    "make_batch",
    "make_target_first",
    "parse_checkpoint",
    "profile_sample",
    "save_checkpoint",
    "sinusoidal_encoding",
    "total_loss",
    "total_loss_grad",
    "train",
]
