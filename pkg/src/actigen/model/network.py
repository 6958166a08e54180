"""Batch construction and the encoder-decoder forward/backward passes.

Encoder layout.  The full input is five member blocks, each 26 attribute
positions followed by one learnable SEP delimiter (135 positions), then an
optional activity prefix.  Attribute positions of padding members are
masked from attention; the five SEPs are always visible, so a one-member
household attends 26 + 5 = 31 positions.  Batches may be "packed": member
blocks beyond the batch's largest household are dropped except for their
SEP, and positional encodings are indexed by the original layout position,
which keeps packing mathematically identical to the full layout.

Decoder.  Teacher forcing feeds [SOS, a_1 .. a_T]; position j predicts
a_{j+1}, and the final position predicts EOS.  Start and end slots embed
through separate tables and share a combiner with the type embedding.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..core import MAX_HOUSEHOLD_MEMBERS
from ..ingest import EncodedSample
from ..schema import N_ATTRS
from .config import (
    FULL_ENC_LEN,
    ModelConfig,
    EOS_INDEX,
    TYPE_PAD,
    TYPE_SOS,
)
from .layers import (
    attention,
    attention_bwd,
    dropout,
    dropout_bwd,
    feed_forward,
    feed_forward_bwd,
    layer_norm,
    layer_norm_bwd,
    linear,
    linear_bwd,
)
from .params import ModelParams, sinusoidal_encoding

BLOCK = N_ATTRS + 1  # attribute positions per member plus its SEP


@lru_cache(maxsize=8)
def _pe_table(length: int, d: int, dtype_name: str) -> np.ndarray:
    return sinusoidal_encoding(length, d, dtype=np.dtype(dtype_name))


@dataclass
class Batch:
    """Model-ready integer arrays for a list of samples."""

    profiles: np.ndarray      # (B, M, 26) attribute codes
    member_mask: np.ndarray   # (B, M) bool, True = real member
    weekday: np.ndarray       # (B,)
    pos_idx: np.ndarray       # (Le,) original layout position per physical one
    attr_phys: np.ndarray     # physical indices of attribute positions
    sep_phys: np.ndarray      # physical indices of the 5 SEPs
    enc_attend: np.ndarray    # (B, Le) bool
    dec_type: np.ndarray      # (B, T) input codes, SOS first
    dec_start: np.ndarray     # (B, T)
    dec_end: np.ndarray       # (B, T)
    tgt_type: np.ndarray      # (B, T) head indices (code-1, EOS last)
    tgt_start: np.ndarray     # (B, T) slot-1
    tgt_end: np.ndarray       # (B, T)
    type_mask: np.ndarray     # (B, T) bool: positions with a type target
    time_mask: np.ndarray     # (B, T) bool: positions with slot targets
    prefix_type: np.ndarray | None = None   # (B, P) codes, PAD where absent
    prefix_start: np.ndarray | None = None
    prefix_end: np.ndarray | None = None
    prefix_valid: np.ndarray | None = None  # (B, P) bool
    prefix_phys: np.ndarray | None = None   # (P,) physical indices

    @property
    def n(self) -> int:
        return self.profiles.shape[0]

    @property
    def enc_len(self) -> int:
        return self.pos_idx.shape[0]


def _layout(m_blocks: int, prefix_len: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None]:
    """Physical layout arrays for a batch with m_blocks member blocks."""
    mm = MAX_HOUSEHOLD_MEMBERS
    pos_idx = []
    attr_phys = []
    sep_phys = np.empty(mm, dtype=np.int64)
    for m in range(m_blocks):
        for a in range(N_ATTRS):
            attr_phys.append(len(pos_idx))
            pos_idx.append(m * BLOCK + a)
        sep_phys[m] = len(pos_idx)
        pos_idx.append(m * BLOCK + N_ATTRS)
    for m in range(m_blocks, mm):
        sep_phys[m] = len(pos_idx)
        pos_idx.append(m * BLOCK + N_ATTRS)
    prefix_phys = None
    if prefix_len:
        prefix_phys = np.arange(len(pos_idx), len(pos_idx) + prefix_len, dtype=np.int64)
        pos_idx.extend(range(FULL_ENC_LEN, FULL_ENC_LEN + prefix_len))
    return (np.asarray(pos_idx, dtype=np.int64), np.asarray(attr_phys, dtype=np.int64),
            sep_phys, prefix_phys)


def make_batch(
    samples: list[EncodedSample],
    config: ModelConfig,
    pack: bool = True,
    with_prefix: bool = False,
) -> Batch:
    """Assemble integer arrays; chains become teacher-forcing tensors.

    with_prefix additionally exposes each sample's own chain as an encoder
    activity prefix (used by the attention export, not by training).
    """
    b = len(samples)
    if b == 0:
        raise ValueError("empty batch")
    # the diary member always occupies block 0 so the model knows whose
    # chain it is predicting
    samples = [make_target_first(s) for s in samples]
    mm = MAX_HOUSEHOLD_MEMBERS
    m_blocks = max(s.n_members for s in samples) if pack else mm
    lens = np.array([len(s.chain) for s in samples], dtype=np.int64)
    t = int(lens.max()) + 1
    prefix_len = int(lens.max()) if with_prefix else 0

    pos_idx, attr_phys, sep_phys, prefix_phys = _layout(m_blocks, prefix_len)
    le = pos_idx.shape[0]

    profiles = np.empty((b, m_blocks, N_ATTRS), dtype=np.int64)
    member_mask = np.zeros((b, m_blocks), dtype=bool)
    weekday = np.empty(b, dtype=np.int64)
    dec_type = np.full((b, t), TYPE_PAD, dtype=np.int64)
    dec_start = np.zeros((b, t), dtype=np.int64)
    dec_end = np.zeros((b, t), dtype=np.int64)
    tgt_type = np.zeros((b, t), dtype=np.int64)
    tgt_start = np.zeros((b, t), dtype=np.int64)
    tgt_end = np.zeros((b, t), dtype=np.int64)

    for i, s in enumerate(samples):
        for m in range(m_blocks):
            profiles[i, m] = s.members[m].attributes
            member_mask[i, m] = s.member_mask[m]
        weekday[i] = s.weekday
        dec_type[i, 0] = TYPE_SOS
        for j, a in enumerate(s.chain):
            dec_type[i, j + 1] = a.kind
            dec_start[i, j + 1] = a.start
            dec_end[i, j + 1] = a.end
            tgt_type[i, j] = a.kind - 1
            tgt_start[i, j] = a.start - 1
            tgt_end[i, j] = a.end - 1
        tgt_type[i, len(s.chain)] = EOS_INDEX

    steps = np.arange(t)[None, :]
    type_mask = steps <= lens[:, None]
    time_mask = steps < lens[:, None]

    enc_attend = np.zeros((b, le), dtype=bool)
    attr_attend = np.repeat(member_mask, N_ATTRS, axis=1)  # (B, M*26) m-major
    enc_attend[:, attr_phys] = attr_attend
    enc_attend[:, sep_phys] = True

    prefix_type = prefix_start = prefix_end = prefix_valid = None
    if with_prefix:
        prefix_type = np.full((b, prefix_len), TYPE_PAD, dtype=np.int64)
        prefix_start = np.zeros((b, prefix_len), dtype=np.int64)
        prefix_end = np.zeros((b, prefix_len), dtype=np.int64)
        for i, s in enumerate(samples):
            for j, a in enumerate(s.chain):
                prefix_type[i, j] = a.kind
                prefix_start[i, j] = a.start
                prefix_end[i, j] = a.end
        prefix_valid = np.arange(prefix_len)[None, :] < lens[:, None]
        enc_attend[:, prefix_phys] = prefix_valid

    return Batch(
        profiles=profiles, member_mask=member_mask, weekday=weekday,
        pos_idx=pos_idx, attr_phys=attr_phys, sep_phys=sep_phys,
        enc_attend=enc_attend,
        dec_type=dec_type, dec_start=dec_start, dec_end=dec_end,
        tgt_type=tgt_type, tgt_start=tgt_start, tgt_end=tgt_end,
        type_mask=type_mask, time_mask=time_mask,
        prefix_type=prefix_type, prefix_start=prefix_start,
        prefix_end=prefix_end, prefix_valid=prefix_valid, prefix_phys=prefix_phys,
    )


def _act_embedding(p: dict, type_codes, start_codes, end_codes):
    te = p["act_embed.type"][type_codes]
    se = p["act_embed.start"][start_codes]
    ee = p["act_embed.end"][end_codes]
    cat = np.concatenate([te, se, ee], axis=-1)
    out, cache = linear(cat, p["act_embed.W"], p["act_embed.b"])
    return out, cache


def _act_embedding_bwd(grads, p, dout, cache, type_codes, start_codes, end_codes, de):
    dcat, dw, db = linear_bwd(dout, cache)
    _acc(grads, "act_embed.W", dw)
    _acc(grads, "act_embed.b", db)
    np.add.at(grads["act_embed.type"], type_codes, dcat[..., :de])
    np.add.at(grads["act_embed.start"], start_codes, dcat[..., de:2 * de])
    np.add.at(grads["act_embed.end"], end_codes, dcat[..., 2 * de:])


def _acc(grads: dict, name: str, val: np.ndarray) -> None:
    if name in grads:
        grads[name] += val
    else:
        grads[name] = val


@dataclass
class ForwardResult:
    logits_type: np.ndarray
    logits_start: np.ndarray
    logits_end: np.ndarray
    type_mask: np.ndarray
    time_mask: np.ndarray
    memory: np.ndarray
    enc_attn: list | None
    cache: tuple


def encode(
    params: ModelParams,
    batch: Batch,
    train: bool = False,
    rng: np.random.Generator | None = None,
    collect_attn: bool = False,
) -> tuple[np.ndarray, list | None, tuple]:
    """Run the encoder stack; returns (memory, attention maps, cache)."""
    p = params.tensors
    cfg = params.config
    dtype = params.dtype
    d, de, h = cfg.d_model, cfg.de, cfg.n_heads
    drop = cfg.dropout
    b = batch.n
    m_blocks = batch.profiles.shape[1]

    pe = _pe_table(FULL_ENC_LEN + cfg.max_len + 1, d, dtype.name)

    attr_emb = np.stack(
        [p[f"attr_embed.{a}"][batch.profiles[:, :, a]] for a in range(N_ATTRS)], axis=2
    )  # (B, M, 26, de)
    attr_flat = attr_emb.reshape(b, m_blocks * N_ATTRS, de)
    attr_proj, c_aproj = linear(attr_flat, p["attr_proj.W"], p["attr_proj.b"])

    x = np.zeros((b, batch.enc_len, d), dtype=dtype)
    x[:, batch.attr_phys, :] = attr_proj
    x[:, batch.sep_phys, :] = p["sep"][None, :, :]
    c_prefix = None
    if batch.prefix_phys is not None and batch.prefix_phys.size:
        pref, c_prefix = _act_embedding(p, batch.prefix_type, batch.prefix_start, batch.prefix_end)
        x[:, batch.prefix_phys, :] = pref
    x = x + pe[batch.pos_idx][None, :, :]
    x = x + p["attr_embed.weekday"][batch.weekday][:, None, :]
    x, m_encdrop = dropout(x, drop, train, rng)

    enc_caches = []
    enc_attn = [] if collect_attn else None
    for l in range(cfg.n_encoder_layers):
        a_out, probs, c_attn = attention(
            x, x, p, f"enc.{l}.attn", h, key_mask=batch.enc_attend,
        )
        if collect_attn:
            enc_attn.append(probs)
        a_drop, m1 = dropout(a_out, drop, train, rng)
        x1, c_ln1 = layer_norm(x + a_drop, p[f"enc.{l}.ln1.g"], p[f"enc.{l}.ln1.b"])
        f_out, c_ff = feed_forward(x1, p, f"enc.{l}.ff")
        f_drop, m2 = dropout(f_out, drop, train, rng)
        x2, c_ln2 = layer_norm(x1 + f_drop, p[f"enc.{l}.ln2.g"], p[f"enc.{l}.ln2.b"])
        enc_caches.append((c_attn, m1, c_ln1, c_ff, m2, c_ln2))
        x = x2
    return x, enc_attn, (c_aproj, attr_flat, c_prefix, m_encdrop, enc_caches)


def decode(
    params: ModelParams,
    memory: np.ndarray,
    enc_attend: np.ndarray,
    dec_type: np.ndarray,
    dec_start: np.ndarray,
    dec_end: np.ndarray,
    dec_valid: np.ndarray,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple]:
    """Run the decoder stack and heads over teacher-forced inputs."""
    p = params.tensors
    cfg = params.config
    h = cfg.n_heads
    drop = cfg.dropout
    pe = _pe_table(FULL_ENC_LEN + cfg.max_len + 1, cfg.d_model, params.dtype.name)

    t = dec_type.shape[1]
    y, c_dec_emb = _act_embedding(p, dec_type, dec_start, dec_end)
    y = y + pe[:t][None, :, :]
    y, m_decdrop = dropout(y, drop, train, rng)

    dec_caches = []
    for l in range(cfg.n_decoder_layers):
        s_out, _, c_self = attention(
            y, y, p, f"dec.{l}.self", h, key_mask=dec_valid, causal=True,
        )
        s_drop, m1 = dropout(s_out, drop, train, rng)
        y1, c_ln1 = layer_norm(y + s_drop, p[f"dec.{l}.ln1.g"], p[f"dec.{l}.ln1.b"])
        x_out, _, c_cross = attention(
            y1, memory, p, f"dec.{l}.cross", h, key_mask=enc_attend,
        )
        x_drop, m2 = dropout(x_out, drop, train, rng)
        y2, c_ln2 = layer_norm(y1 + x_drop, p[f"dec.{l}.ln2.g"], p[f"dec.{l}.ln2.b"])
        f_out, c_ff = feed_forward(y2, p, f"dec.{l}.ff")
        f_drop, m3 = dropout(f_out, drop, train, rng)
        y3, c_ln3 = layer_norm(y2 + f_drop, p[f"dec.{l}.ln3.g"], p[f"dec.{l}.ln3.b"])
        dec_caches.append((c_self, m1, c_ln1, c_cross, m2, c_ln2, c_ff, m3, c_ln3))
        y = y3

    lt, c_ht = linear(y, p["head.type.W"], p["head.type.b"])
    ls, c_hs = linear(y, p["head.start.W"], p["head.start.b"])
    le_, c_he = linear(y, p["head.end.W"], p["head.end.b"])
    return lt, ls, le_, (c_dec_emb, m_decdrop, dec_caches, c_ht, c_hs, c_he)


def forward_batch(
    params: ModelParams,
    batch: Batch,
    train: bool = False,
    rng: np.random.Generator | None = None,
    collect_attn: bool = False,
) -> ForwardResult:
    memory, enc_attn, enc_cache = encode(params, batch, train, rng, collect_attn)
    lt, ls, le_, dec_cache = decode(
        params, memory, batch.enc_attend,
        batch.dec_type, batch.dec_start, batch.dec_end,
        batch.type_mask,  # SOS plus real steps are valid decoder keys
        train=train, rng=rng,
    )
    return ForwardResult(lt, ls, le_, batch.type_mask, batch.time_mask,
                         memory, enc_attn, enc_cache + dec_cache)


def backward_batch(
    params: ModelParams,
    batch: Batch,
    fwd: ForwardResult,
    d_logits_type: np.ndarray,
    d_logits_start: np.ndarray,
    d_logits_end: np.ndarray,
) -> dict[str, np.ndarray]:
    p = params.tensors
    cfg = params.config
    de = cfg.de
    (c_aproj, attr_flat, c_prefix, m_encdrop, enc_caches,
     c_dec_emb, m_decdrop, dec_caches, c_ht, c_hs, c_he) = fwd.cache

    grads: dict[str, np.ndarray] = {
        f"attr_embed.{a}": np.zeros_like(p[f"attr_embed.{a}"]) for a in range(N_ATTRS)
    }
    grads["attr_embed.weekday"] = np.zeros_like(p["attr_embed.weekday"])
    grads["act_embed.type"] = np.zeros_like(p["act_embed.type"])
    grads["act_embed.start"] = np.zeros_like(p["act_embed.start"])
    grads["act_embed.end"] = np.zeros_like(p["act_embed.end"])

    dy, dw, db = linear_bwd(d_logits_type, c_ht)
    _acc(grads, "head.type.W", dw)
    _acc(grads, "head.type.b", db)
    dy2, dw, db = linear_bwd(d_logits_start, c_hs)
    _acc(grads, "head.start.W", dw)
    _acc(grads, "head.start.b", db)
    dy += dy2
    dy3, dw, db = linear_bwd(d_logits_end, c_he)
    _acc(grads, "head.end.W", dw)
    _acc(grads, "head.end.b", db)
    dy += dy3

    d_memory = np.zeros_like(fwd.memory)
    for l in reversed(range(cfg.n_decoder_layers)):
        c_self, m1, c_ln1, c_cross, m2, c_ln2, c_ff, m3, c_ln3 = dec_caches[l]
        dec_caches[l] = None  # release layer activations as they are consumed
        dy, dg, db = layer_norm_bwd(dy, c_ln3)
        _acc(grads, f"dec.{l}.ln3.g", dg)
        _acc(grads, f"dec.{l}.ln3.b", db)
        df = dropout_bwd(dy, m3)
        dff_in, g = feed_forward_bwd(df, c_ff, f"dec.{l}.ff")
        for k, v in g.items():
            _acc(grads, k, v)
        dy2 = dy + dff_in
        dy2, dg, db = layer_norm_bwd(dy2, c_ln2)
        _acc(grads, f"dec.{l}.ln2.g", dg)
        _acc(grads, f"dec.{l}.ln2.b", db)
        dx = dropout_bwd(dy2, m2)
        dq, dkv, g = attention_bwd(dx, c_cross, f"dec.{l}.cross")
        for k, v in g.items():
            _acc(grads, k, v)
        d_memory += dkv
        dy1 = dy2 + dq
        dy1, dg, db = layer_norm_bwd(dy1, c_ln1)
        _acc(grads, f"dec.{l}.ln1.g", dg)
        _acc(grads, f"dec.{l}.ln1.b", db)
        ds = dropout_bwd(dy1, m1)
        dq, dkv, g = attention_bwd(ds, c_self, f"dec.{l}.self")
        for k, v in g.items():
            _acc(grads, k, v)
        dy = dy1 + dq + dkv

    dy = dropout_bwd(dy, m_decdrop)
    _act_embedding_bwd(grads, p, dy, c_dec_emb,
                       batch.dec_type, batch.dec_start, batch.dec_end, de)

    dx = d_memory
    for l in reversed(range(cfg.n_encoder_layers)):
        c_attn, m1, c_ln1, c_ff, m2, c_ln2 = enc_caches[l]
        enc_caches[l] = None  # release layer activations as they are consumed
        dx, dg, db = layer_norm_bwd(dx, c_ln2)
        _acc(grads, f"enc.{l}.ln2.g", dg)
        _acc(grads, f"enc.{l}.ln2.b", db)
        df = dropout_bwd(dx, m2)
        dff_in, g = feed_forward_bwd(df, c_ff, f"enc.{l}.ff")
        for k, v in g.items():
            _acc(grads, k, v)
        dx1 = dx + dff_in
        dx1, dg, db = layer_norm_bwd(dx1, c_ln1)
        _acc(grads, f"enc.{l}.ln1.g", dg)
        _acc(grads, f"enc.{l}.ln1.b", db)
        da = dropout_bwd(dx1, m1)
        dq, dkv, g = attention_bwd(da, c_attn, f"enc.{l}.attn")
        for k, v in g.items():
            _acc(grads, k, v)
        dx = dx1 + dq + dkv

    dx = dropout_bwd(dx, m_encdrop)
    np.add.at(grads["attr_embed.weekday"], batch.weekday, dx.sum(axis=1))
    _acc(grads, "sep", dx[:, batch.sep_phys, :].sum(axis=0))
    if batch.prefix_phys is not None and batch.prefix_phys.size:
        _act_embedding_bwd(grads, p, dx[:, batch.prefix_phys, :], c_prefix,
                           batch.prefix_type, batch.prefix_start, batch.prefix_end, de)
    d_attr_proj = dx[:, batch.attr_phys, :]
    d_attr_flat, dw, db = linear_bwd(d_attr_proj, c_aproj)
    _acc(grads, "attr_proj.W", dw)
    _acc(grads, "attr_proj.b", db)
    b, _, _ = attr_flat.shape
    m_blocks = batch.profiles.shape[1]
    d_attr_emb = d_attr_flat.reshape(b, m_blocks, N_ATTRS, de)
    for a in range(N_ATTRS):
        np.add.at(grads[f"attr_embed.{a}"], batch.profiles[:, :, a], d_attr_emb[:, :, a, :])

    for name in params.tensors:
        if name not in grads:
            grads[name] = np.zeros_like(params.tensors[name])
    return grads


def forward(
    params: ModelParams,
    samples: list[EncodedSample],
    train: bool = False,
    rng: np.random.Generator | None = None,
    pack: bool = True,
) -> tuple[ForwardResult, Batch]:
    """Teacher-forced forward pass over raw samples."""
    batch = make_batch(samples, params.config, pack=pack)
    return forward_batch(params, batch, train=train, rng=rng), batch


def _position_labels(m_blocks: int, prefix_len: int) -> list[str]:
    labels = []
    for m in range(m_blocks):
        tag = "target" if m == 0 else f"member{m + 1}"
        labels.extend(f"{tag}:attr{a}" for a in range(N_ATTRS))
        labels.append(f"sep{m + 1}")
    for m in range(m_blocks, MAX_HOUSEHOLD_MEMBERS):
        labels.append(f"sep{m + 1}")
    labels.extend(f"activity{j + 1}" for j in range(prefix_len))
    return labels


def build_encoder_input(
    params: ModelParams,
    sample: EncodedSample,
    with_chain: bool = True,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Assembled encoder input for one sample in the full layout.

    Returns (vectors (L, d), attended (L,) bool, position labels).  Member
    blocks are rotated so the diary target is block 0 ("target" labels).
    """
    batch = make_batch([sample], params.config, pack=False, with_prefix=with_chain)
    p = params.tensors
    cfg = params.config
    d, de = cfg.d_model, cfg.de
    pe = _pe_table(FULL_ENC_LEN + cfg.max_len + 1, d, params.dtype.name)

    attr_emb = np.stack(
        [p[f"attr_embed.{a}"][batch.profiles[:, :, a]] for a in range(N_ATTRS)], axis=2
    ).reshape(1, -1, de)
    attr_proj, _ = linear(attr_emb, p["attr_proj.W"], p["attr_proj.b"])
    x = np.zeros((1, batch.enc_len, d), dtype=params.dtype)
    x[:, batch.attr_phys, :] = attr_proj
    x[:, batch.sep_phys, :] = p["sep"][None, :, :]
    if batch.prefix_phys is not None and batch.prefix_phys.size:
        pref, _ = _act_embedding(p, batch.prefix_type, batch.prefix_start, batch.prefix_end)
        x[:, batch.prefix_phys, :] = pref
    x = x + pe[batch.pos_idx][None, :, :]
    x = x + p["attr_embed.weekday"][batch.weekday][:, None, :]

    prefix_len = 0 if batch.prefix_phys is None else batch.prefix_phys.size
    labels = _position_labels(MAX_HOUSEHOLD_MEMBERS, prefix_len)
    return x[0], batch.enc_attend[0], labels


def make_target_first(sample: EncodedSample) -> EncodedSample:
    """Rotate members so the diary target occupies block 0."""
    if sample.target_index == 0:
        return sample
    order = [sample.target_index] + [
        i for i in range(MAX_HOUSEHOLD_MEMBERS) if i != sample.target_index
    ]
    return EncodedSample(
        household_id=sample.household_id,
        members=tuple(sample.members[i] for i in order),
        member_mask=tuple(sample.member_mask[i] for i in order),
        target_index=0,
        chain=sample.chain,
        weekday=sample.weekday,
    )
