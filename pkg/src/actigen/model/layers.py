"""Transformer building blocks as forward/backward function pairs.

Every forward returns (output, cache); the matching backward consumes the
upstream gradient and the cache and returns input gradients plus a dict of
parameter gradients keyed by the caller's names.  All math is plain numpy
so a single dtype flows through unchanged.
"""
from __future__ import annotations

import numpy as np

NEG_INF = -1e9
LN_EPS = 1e-5


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    y = x @ w
    y += b
    return y, (x, w)


def linear_bwd(dout: np.ndarray, cache):
    x, w = cache
    dx = dout @ w.T
    dw = x.reshape(-1, x.shape[-1]).T @ dout.reshape(-1, dout.shape[-1])
    db = dout.reshape(-1, dout.shape[-1]).sum(axis=0)
    return dx, dw, db


_GELU_C = 0.7978845608028654  # sqrt(2 / pi)
_GELU_A = 0.044715


def gelu(x: np.ndarray):
    """Smooth GELU (tanh form).

    A smooth activation keeps the training objective twice differentiable,
    so central-difference gradient checks converge at O(eps^2) instead of
    tripping over ReLU kinks.
    """
    t = np.tanh(_GELU_C * (x + _GELU_A * x * x * x))
    out = 0.5 * x * (1.0 + t)
    return out, (x, t)


def gelu_bwd(dout: np.ndarray, cache):
    x, t = cache
    du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
    dx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
    return dout * dx


def dropout(x: np.ndarray, p: float, train: bool, rng: np.random.Generator | None):
    """Inverted dropout; identity when not training or p == 0.

    The cache keeps only a boolean mask so large attention tensors do not
    double their footprint.
    """
    if not train or p <= 0.0:
        return x, None
    keep = 1.0 - p
    mask = rng.random(x.shape, dtype=np.float32) < keep
    out = np.where(mask, x, 0.0)
    out *= 1.0 / keep
    return out, (mask, keep)


def dropout_bwd(dout: np.ndarray, cache):
    if cache is None:
        return dout
    mask, keep = cache
    dx = np.where(mask, dout, 0.0)
    dx *= 1.0 / keep
    return dx


def layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv, g)


def layer_norm_bwd(dout: np.ndarray, cache):
    xhat, inv, g = cache
    d = xhat.shape[-1]
    dxhat = dout * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    dg = (dout * xhat).reshape(-1, d).sum(axis=0)
    db = dout.reshape(-1, d).sum(axis=0)
    return dx, dg, db


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _softmax_inplace(z: np.ndarray) -> np.ndarray:
    """Row softmax over the last axis, overwriting z."""
    z -= z.max(axis=-1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=-1, keepdims=True)
    return z


def _split_heads(x: np.ndarray, h: int) -> np.ndarray:
    b, l, d = x.shape
    return x.reshape(b, l, h, d // h).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, l, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, l, h * dh)


def attention(
    q_in: np.ndarray,
    kv_in: np.ndarray,
    p: dict,
    prefix: str,
    n_heads: int,
    key_mask: np.ndarray | None = None,
    causal: bool = False,
):
    """Multi-head scaled dot-product attention.

    key_mask: (B, Lk) bool, True where the key may be attended.  causal
    adds a lower-triangular constraint (query i sees keys <= i).  The
    (B, H, Lq, Lk) score tensor dominates memory and bandwidth, so it is
    masked and normalized in place; dropout is applied by the caller on
    the sublayer output, not on the probabilities.
    """
    q, cq = linear(q_in, p[f"{prefix}.Wq"], p[f"{prefix}.bq"])
    k = kv_in @ p[f"{prefix}.Wk"]  # key bias would cancel in softmax
    ck = (kv_in, p[f"{prefix}.Wk"])
    v, cv = linear(kv_in, p[f"{prefix}.Wv"], p[f"{prefix}.bv"])
    h = n_heads
    qh, kh, vh = _split_heads(q, h), _split_heads(k, h), _split_heads(v, h)
    dh = qh.shape[-1]
    scores = qh @ kh.transpose(0, 1, 3, 2)
    scores *= 1.0 / np.sqrt(dh)
    if key_mask is not None:
        scores += np.where(key_mask[:, None, None, :], 0.0, NEG_INF).astype(scores.dtype)
    if causal:
        lq, lk = scores.shape[-2], scores.shape[-1]
        tri = np.tril(np.ones((lq, lk), dtype=bool), k=lk - lq)
        scores += np.where(tri, 0.0, NEG_INF).astype(scores.dtype)
    probs = _softmax_inplace(scores)
    ctx = probs @ vh
    merged = _merge_heads(ctx)
    out, co = linear(merged, p[f"{prefix}.Wo"], p[f"{prefix}.bo"])
    cache = (cq, ck, cv, co, qh, kh, vh, probs, dh)
    return out, probs, cache


def attention_bwd(dout: np.ndarray, cache, prefix: str):
    cq, ck, cv, co, qh, kh, vh, probs, dh = cache
    grads: dict[str, np.ndarray] = {}

    dmerged, grads[f"{prefix}.Wo"], grads[f"{prefix}.bo"] = linear_bwd(dout, co)
    h = qh.shape[1]
    dctx = _split_heads(dmerged, h)

    dvh = probs.transpose(0, 1, 3, 2) @ dctx
    dprobs = dctx @ vh.transpose(0, 1, 3, 2)
    # softmax backward, fused in place on dprobs
    row = np.einsum("bhij,bhij->bhi", dprobs, probs)
    dprobs -= row[..., None]
    dprobs *= probs
    dprobs *= 1.0 / np.sqrt(dh)
    dqh = dprobs @ kh
    dkh = dprobs.transpose(0, 1, 3, 2) @ qh

    dq = _merge_heads(dqh)
    dk = _merge_heads(dkh)
    dv = _merge_heads(dvh)
    dq_in, grads[f"{prefix}.Wq"], grads[f"{prefix}.bq"] = linear_bwd(dq, cq)
    dk_in, grads[f"{prefix}.Wk"], _ = linear_bwd(dk, ck)
    dv_in, grads[f"{prefix}.Wv"], grads[f"{prefix}.bv"] = linear_bwd(dv, cv)
    return dq_in, dk_in + dv_in, grads


def feed_forward(x: np.ndarray, p: dict, prefix: str):
    h1, c1 = linear(x, p[f"{prefix}.W1"], p[f"{prefix}.b1"])
    a, cg = gelu(h1)
    out, c2 = linear(a, p[f"{prefix}.W2"], p[f"{prefix}.b2"])
    return out, (c1, cg, c2)


def feed_forward_bwd(dout: np.ndarray, cache, prefix: str):
    c1, cg, c2 = cache
    grads: dict[str, np.ndarray] = {}
    da, grads[f"{prefix}.W2"], grads[f"{prefix}.b2"] = linear_bwd(dout, c2)
    dh1 = gelu_bwd(da, cg)
    dx, grads[f"{prefix}.W1"], grads[f"{prefix}.b1"] = linear_bwd(dh1, c1)
    return dx, grads
