"""Training objective: cross-entropy, soft time labels, and order penalties.

The time heads train against soft labels: full weight on the true slot and
a small side weight on neighbors up to side_steps away, clipped at the
slot range (no wraparound).  Slot probabilities additionally feed two
hinge penalties through their softmax expectation: consecutive activities
should not start before the previous one ends, and an activity should not
end before it starts.

Every loss returns (value, dlogits) so the caller can combine gradients;
the plain value-only spellings are thin wrappers used by tests and docs.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .config import LossWeights, SoftLabelConfig, TIME_LOGITS


def log_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    zm = z - z.max(axis=axis, keepdims=True)
    return zm - np.log(np.exp(zm).sum(axis=axis, keepdims=True))


def _check_masked(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> int:
    if logits.shape[:-1] != targets.shape or targets.shape != mask.shape:
        raise ValueError("logits, targets and mask shapes disagree")
    n = int(mask.sum())
    if n == 0:
        raise ValueError("loss over an empty mask")
    return n


def loss_ce_grad(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray):
    """Masked mean cross-entropy and its logit gradient."""
    n = _check_masked(logits, targets, mask)
    lp = log_softmax(logits)
    tgt = np.where(mask, targets, 0)
    picked = np.take_along_axis(lp, tgt[..., None], axis=-1)[..., 0]
    loss = -float((picked * mask).sum() / n)

    probs = np.exp(lp)
    dlogits = probs.copy()
    np.put_along_axis(
        dlogits, tgt[..., None],
        np.take_along_axis(dlogits, tgt[..., None], axis=-1) - 1.0, axis=-1
    )
    dlogits *= (mask[..., None] / n)
    return loss, dlogits


def loss_ce(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> float:
    return loss_ce_grad(logits, targets, mask)[0]


def _soft_entries(targets: np.ndarray, n_classes: int, cfg: SoftLabelConfig):
    """Pairs (weight, clipped index, in-range bool) describing the soft
    label rows; the main entry first, then each side offset."""
    entries = [(cfg.main_weight, targets, np.ones(targets.shape, dtype=bool))]
    for s in range(1, cfg.side_steps + 1):
        for sign in (-1, 1):
            idx = targets + sign * s
            ok = (idx >= 0) & (idx < n_classes)
            entries.append((cfg.side_weight, np.clip(idx, 0, n_classes - 1), ok))
    return entries


def loss_soft_grad(
    logits: np.ndarray,
    targets: np.ndarray,
    mask: np.ndarray,
    cfg: SoftLabelConfig | None = None,
):
    """Soft-label time loss and its logit gradient.

    Computes -mean over valid positions of sum_j S_j * log(P_j + eps),
    with S the unnormalized soft-label row.  The log runs through
    logaddexp so eps = 0 degrades bit-exactly to hard cross-entropy.
    """
    cfg = cfg or SoftLabelConfig()
    n = _check_masked(logits, targets, mask)
    c = logits.shape[-1]
    lp = log_softmax(logits)
    if cfg.eps > 0.0:
        lpe = np.logaddexp(lp, np.log(cfg.eps))
    else:
        lpe = lp
    probs = np.exp(lp)
    pe = probs + cfg.eps

    tgt = np.where(mask, targets, 0)
    acc = np.zeros(tgt.shape, dtype=logits.dtype)
    # r = S * p / (p + eps) accumulated per class for the gradient
    r = np.zeros_like(logits)
    for w, idx, ok in _soft_entries(tgt, c, cfg):
        take = np.take_along_axis(lpe, idx[..., None], axis=-1)[..., 0]
        acc += np.where(ok, w * take, 0.0)
        ratio = np.take_along_axis(probs, idx[..., None], axis=-1)[..., 0]
        ratio = ratio / np.take_along_axis(pe, idx[..., None], axis=-1)[..., 0]
        contrib = np.where(ok & mask, w * ratio, 0.0)
        np.put_along_axis(
            r, idx[..., None],
            np.take_along_axis(r, idx[..., None], axis=-1) + contrib[..., None], axis=-1
        )
    loss = -float((acc * mask).sum() / n)

    rsum = r.sum(axis=-1, keepdims=True)
    dlogits = (probs * rsum - r) / n
    return loss, dlogits


def loss_soft(logits, targets, mask, cfg: SoftLabelConfig | None = None) -> float:
    return loss_soft_grad(logits, targets, mask, cfg)[0]


_SLOTS = np.arange(1, TIME_LOGITS + 1, dtype=np.float64)


def expected_slot(logits: np.ndarray) -> np.ndarray:
    """Softmax expectation of the slot index (1..96) per position."""
    probs = np.exp(log_softmax(logits))
    return probs @ _SLOTS.astype(logits.dtype)


def _expected_slot_grad(logits: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """Chain rule through the softmax expectation: d e / d z_j =
    p_j (slot_j - e)."""
    probs = np.exp(log_softmax(logits))
    e = probs @ _SLOTS.astype(logits.dtype)
    return dout[..., None] * probs * (_SLOTS.astype(logits.dtype) - e[..., None])


def loss_order_grad(logits_start: np.ndarray, logits_end: np.ndarray, time_mask: np.ndarray):
    """Temporal order penalty between consecutive activities.

    mean over valid positions of max(0, e_end[i-1] - e_start[i]); the
    first activity contributes zero.  Both expectations come from the
    same forward logits, so the gradient flows into start and end heads.
    """
    n = int(time_mask.sum())
    if n == 0:
        raise ValueError("loss over an empty mask")
    es = expected_slot(logits_start)
    ee = expected_slot(logits_end)
    gap = ee[:, :-1] - es[:, 1:]
    pair_mask = time_mask[:, 1:] & time_mask[:, :-1]
    hinge = np.where(pair_mask & (gap > 0), gap, 0.0)
    loss = float(hinge.sum() / n)

    active = (pair_mask & (gap > 0)).astype(logits_start.dtype) / n
    des = np.zeros(es.shape, dtype=logits_start.dtype)
    dee = np.zeros(ee.shape, dtype=logits_end.dtype)
    dee[:, :-1] += active
    des[:, 1:] -= active
    return loss, _expected_slot_grad(logits_start, des), _expected_slot_grad(logits_end, dee)


def loss_order(logits_start, logits_end, time_mask) -> float:
    return loss_order_grad(logits_start, logits_end, time_mask)[0]


def loss_seq_grad(logits_start: np.ndarray, logits_end: np.ndarray, time_mask: np.ndarray):
    """Within-activity timing penalty: mean max(0, e_start - e_end)."""
    n = int(time_mask.sum())
    if n == 0:
        raise ValueError("loss over an empty mask")
    es = expected_slot(logits_start)
    ee = expected_slot(logits_end)
    gap = es - ee
    hinge = np.where(time_mask & (gap > 0), gap, 0.0)
    loss = float(hinge.sum() / n)

    active = (time_mask & (gap > 0)).astype(logits_start.dtype) / n
    return loss, _expected_slot_grad(logits_start, active), _expected_slot_grad(logits_end, -active)


def loss_seq(logits_start, logits_end, time_mask) -> float:
    return loss_seq_grad(logits_start, logits_end, time_mask)[0]


def total_loss_grad(
    logits_type: np.ndarray,
    logits_start: np.ndarray,
    logits_end: np.ndarray,
    tgt_type: np.ndarray,
    tgt_start: np.ndarray,
    tgt_end: np.ndarray,
    type_mask: np.ndarray,
    time_mask: np.ndarray,
    weights: LossWeights | None = None,
    soft: SoftLabelConfig | None = None,
):
    """Weighted combination of the five terms.

    Returns (total, parts dict, d_logits_type, d_logits_start,
    d_logits_end).  Slot-head gradients combine the soft-label terms with
    both hinge penalties.
    """
    weights = weights or LossWeights()
    soft = soft or SoftLabelConfig()

    l_type, d_type = loss_ce_grad(logits_type, tgt_type, type_mask)
    l_start, d_start = loss_soft_grad(logits_start, tgt_start, time_mask, soft)
    l_end, d_end = loss_soft_grad(logits_end, tgt_end, time_mask, soft)
    l_ord, d_ord_s, d_ord_e = loss_order_grad(logits_start, logits_end, time_mask)
    l_seq, d_seq_s, d_seq_e = loss_seq_grad(logits_start, logits_end, time_mask)

    w = weights
    total = (w.w_type * l_type + w.w_start * l_start + w.w_end * l_end
             + w.w_order * l_ord + w.w_seq * l_seq)
    parts = {"type": l_type, "start": l_start, "end": l_end,
             "order": l_ord, "seq": l_seq}
    dt = w.w_type * d_type
    ds = w.w_start * d_start + w.w_order * d_ord_s + w.w_seq * d_seq_s
    de = w.w_end * d_end + w.w_order * d_ord_e + w.w_seq * d_seq_e
    return float(total), parts, dt, ds, de


def total_loss(
    logits_type, logits_start, logits_end,
    tgt_type, tgt_start, tgt_end,
    type_mask, time_mask,
    weights: LossWeights | None = None,
    soft: SoftLabelConfig | None = None,
) -> tuple[float, dict]:
    out = total_loss_grad(logits_type, logits_start, logits_end,
                          tgt_type, tgt_start, tgt_end,
                          type_mask, time_mask, weights, soft)
    return out[0], out[1]
