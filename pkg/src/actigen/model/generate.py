"""Autoregressive chain generation from trained parameters.

Each agent draws from its own random stream seeded by (base seed, input
position), so generated chains do not depend on batch composition or on
how the population is chunked.  The EOS token is masked at the first
step, so every generated chain has at least one activity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core import Activity, ActivityChain, ActivityType, validate_chain
from ..ingest import EncodedSample, make_sample
from ..schema import DatasetSchema
from .config import EOS_INDEX, SamplingConfig, TYPE_PAD, TYPE_SOS
from .layers import NEG_INF
from .network import decode, encode, make_batch
from .params import ModelParams

_CHUNK = 512


def _draw(logits: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    """Sample an index from logits at the given temperature (0 = argmax)."""
    if temperature == 0.0:
        return int(np.argmax(logits))
    z = logits / temperature
    z = z - z.max()
    p = np.exp(z)
    p /= p.sum()
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return min(idx, logits.shape[0] - 1)


def _generate_chunk(
    params: ModelParams,
    samples: Sequence[EncodedSample],
    indices: Sequence[int],
    sampling: SamplingConfig,
    cap: int,
    results: list[ActivityChain | None],
) -> None:
    batch = make_batch([samples[i] for i in indices], params.config)
    memory, _, _ = encode(params, batch)
    b = len(indices)
    rngs = [np.random.default_rng(np.random.SeedSequence((sampling.seed, i)))
            for i in indices]

    dec_type = np.full((b, 1), TYPE_SOS, dtype=np.int64)
    dec_start = np.zeros((b, 1), dtype=np.int64)
    dec_end = np.zeros((b, 1), dtype=np.int64)
    done = np.zeros(b, dtype=bool)
    chains: list[list[Activity]] = [[] for _ in range(b)]

    for step in range(cap):
        dec_valid = np.ones(dec_type.shape, dtype=bool)
        lt, ls, le, _ = decode(params, memory, batch.enc_attend,
                               dec_type, dec_start, dec_end, dec_valid)
        lt_last = lt[:, -1, :].astype(np.float64)
        ls_last = ls[:, -1, :].astype(np.float64)
        le_last = le[:, -1, :].astype(np.float64)
        if step == 0:
            lt_last[:, EOS_INDEX] = NEG_INF

        new_t = np.full(b, TYPE_PAD, dtype=np.int64)
        new_s = np.zeros(b, dtype=np.int64)
        new_e = np.zeros(b, dtype=np.int64)
        for r in range(b):
            if done[r]:
                continue
            ti = _draw(lt_last[r], sampling.temperature, rngs[r])
            if ti == EOS_INDEX:
                done[r] = True
                continue
            si = _draw(ls_last[r], sampling.temperature, rngs[r])
            ei = _draw(le_last[r], sampling.temperature, rngs[r])
            chains[r].append(Activity(ti + 1, si + 1, ei + 1))
            new_t[r], new_s[r], new_e[r] = ti + 1, si + 1, ei + 1
        if done.all():
            break
        dec_type = np.concatenate([dec_type, new_t[:, None]], axis=1)
        dec_start = np.concatenate([dec_start, new_s[:, None]], axis=1)
        dec_end = np.concatenate([dec_end, new_e[:, None]], axis=1)

    for r, i in enumerate(indices):
        results[i] = tuple(chains[r])


def generate(
    params: ModelParams,
    samples: Sequence[EncodedSample],
    sampling: SamplingConfig | None = None,
) -> list[ActivityChain]:
    """Generate one chain per sample, conditioning on its profiles.

    Sample chains are ignored; only household composition, attributes,
    target member, and weekday condition the decoder.  Results are keyed
    to input order, and each position has a fixed random stream.
    """
    sampling = sampling or SamplingConfig()
    cfg = params.config
    cap = cfg.max_len if sampling.max_len is None else min(sampling.max_len, cfg.max_len)
    results: list[ActivityChain | None] = [None] * len(samples)
    groups: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        groups.setdefault(s.n_members, []).append(i)
    for m in sorted(groups):
        idx = groups[m]
        for k in range(0, len(idx), _CHUNK):
            _generate_chunk(params, samples, idx[k:k + _CHUNK], sampling, cap, results)
    return results  # type: ignore[return-value]


def profile_sample(
    household_id: str,
    members: Sequence,
    target_index: int,
    weekday: int,
    schema: DatasetSchema,
) -> EncodedSample:
    """Generation input for a household without an observed diary.

    The placeholder chain satisfies sample validation and is never read
    by generate().
    """
    placeholder = (Activity(ActivityType.HOME, 1, 96),)
    return make_sample(household_id, members, target_index, placeholder, weekday, schema)


@dataclass(frozen=True)
class GenerationStats:
    """Share of structurally valid chains in a generated batch."""

    n_chains: int
    n_valid: int

    @property
    def valid_fraction(self) -> float:
        return self.n_valid / self.n_chains if self.n_chains else 1.0


def generation_stats(chains: Sequence[ActivityChain]) -> GenerationStats:
    n_valid = sum(1 for c in chains if c and not validate_chain(c))
    return GenerationStats(n_chains=len(chains), n_valid=n_valid)
