"""Network mechanics: shapes, masking, causality, packed equivalence."""
from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from actigen.core import MAX_HOUSEHOLD_MEMBERS, AgentProfile
from actigen.model.config import TIME_LOGITS, TYPE_LOGITS
from actigen.model.network import (
    attention,
    dropout,
    forward,
    layer_norm,
    make_batch,
    make_target_first,
    sinusoidal_encoding,
)

B = 4  # samples used from pop_small in batch-level tests


@pytest.fixture(scope="module")
def batch_samples(pop_small):
    return list(pop_small[:B])


class TestShapes:
    def test_forward_logit_shapes(self, tiny_params, batch_samples):
        fwd, batch = forward(tiny_params, batch_samples)
        t = max(len(s.chain) for s in batch_samples) + 1
        assert fwd.logits_type.shape == (B, t, TYPE_LOGITS)
        assert fwd.logits_start.shape == (B, t, TIME_LOGITS)
        assert fwd.logits_end.shape == (B, t, TIME_LOGITS)
        assert fwd.type_mask.shape == (B, t)
        assert fwd.time_mask.shape == (B, t)

    def test_masks_cover_chain_plus_eos(self, tiny_params, batch_samples):
        fwd, _ = forward(tiny_params, batch_samples)
        for i, s in enumerate(batch_samples):
            # one extra type position for EOS, none for the time heads
            assert fwd.type_mask[i].sum() == len(s.chain) + 1
            assert fwd.time_mask[i].sum() == len(s.chain)

    def test_targets_are_zero_based(self, tiny_config, batch_samples):
        batch = make_batch(batch_samples, tiny_config)
        s0 = make_target_first(batch_samples[0])
        assert batch.tgt_type[0, 0] == s0.chain[0].kind - 1
        assert batch.tgt_start[0, 0] == s0.chain[0].start - 1
        assert batch.dec_type[0, 0] == 16  # SOS feeds the first step


class TestCausality:
    def test_future_activity_cannot_leak_backward(self, tiny_params, pop_small):
        base = next(s for s in pop_small if len(s.chain) >= 3)
        length = len(base.chain)
        changed_last = dataclasses.replace(
            base,
            chain=base.chain[:-1] + (dataclasses.replace(
                base.chain[-1], start=base.chain[-1].start,
                end=min(96, base.chain[-1].end - 1 or 96)),),
        )
        assert changed_last.chain != base.chain
        fwd_a, _ = forward(tiny_params, [base])
        fwd_b, _ = forward(tiny_params, [changed_last])
        # Steps 0..L-1 saw identical decoder inputs; only the EOS step
        # (fed by the altered final activity) may move.
        for name in ("logits_type", "logits_start", "logits_end"):
            a = getattr(fwd_a, name)[0, :length]
            b = getattr(fwd_b, name)[0, :length]
            assert a == pytest.approx(b, abs=1e-12), name
        assert not np.allclose(fwd_a.logits_type[0, length], fwd_b.logits_type[0, length])

    def test_attention_causal_flag(self):
        rng = np.random.default_rng(0)
        d = 8
        x = rng.normal(size=(1, 5, d))
        p = {f"a.W{k}": rng.normal(size=(d, d)) * 0.3 for k in ("q", "k", "v", "o")}
        p.update({f"a.b{k}": np.zeros(d) for k in ("q", "k", "v", "o")})
        out1, _ = attention(x, x, p, "a", n_heads=2, causal=True)
        x2 = x.copy()
        x2[0, 4] += 10.0  # perturb the last position only
        out2, _ = attention(x2, x2, p, "a", n_heads=2, causal=True)
        assert out1[0, :4] == pytest.approx(out2[0, :4], abs=1e-12)
        out3, _ = attention(x2, x2, p, "a", n_heads=2, causal=False)
        assert not np.allclose(out1[0, :4], out3[0, :4])

    def test_key_mask_blocks_positions(self):
        rng = np.random.default_rng(1)
        d = 8
        x = rng.normal(size=(1, 3, d))
        kv = rng.normal(size=(1, 4, d))
        p = {f"a.W{k}": rng.normal(size=(d, d)) * 0.3 for k in ("q", "k", "v", "o")}
        p.update({f"a.b{k}": np.zeros(d) for k in ("q", "k", "v", "o")})
        mask = np.array([[True, True, True, False]])
        out1, _ = attention(x, kv, p, "a", n_heads=2, key_mask=mask)
        kv2 = kv.copy()
        kv2[0, 3] += 5.0  # masked-out key must not matter
        out2, _ = attention(x, kv2, p, "a", n_heads=2, key_mask=mask)
        assert out1 == pytest.approx(out2, abs=1e-12)


class TestPacking:
    def test_packed_matches_full_layout(self, tiny_params, pop_small):
        # A single-member household: packed layout drops the dead blocks.
        single = next(s for s in pop_small if s.n_members == 1)
        fwd_packed, _ = forward(tiny_params, [single], pack=True)
        fwd_full, _ = forward(tiny_params, [single], pack=False)
        for name in ("logits_type", "logits_start", "logits_end"):
            assert getattr(fwd_packed, name) == pytest.approx(
                getattr(fwd_full, name), abs=1e-10), name

    def test_padded_member_content_is_ignored(self, tiny_params, pop_small):
        single = next(s for s in pop_small if s.n_members == 1)
        junk = AgentProfile(tuple(0 for _ in range(26)))
        members = list(single.members)
        members[-1] = junk
        altered = dataclasses.replace(single, members=tuple(members))
        fwd_a, _ = forward(tiny_params, [single], pack=False)
        fwd_b, _ = forward(tiny_params, [altered], pack=False)
        assert fwd_a.logits_type == pytest.approx(fwd_b.logits_type, abs=1e-12)

    def test_real_member_content_matters(self, tiny_params, pop_small):
        multi = next(s for s in pop_small if s.n_members >= 2)
        other = (multi.target_index + 1) % multi.n_members
        members = list(multi.members)
        members[other] = AgentProfile(tuple(0 for _ in range(26)))
        altered = dataclasses.replace(multi, members=tuple(members))
        fwd_a, _ = forward(tiny_params, [multi])
        fwd_b, _ = forward(tiny_params, [altered])
        assert not np.allclose(fwd_a.logits_type, fwd_b.logits_type)


class TestTargetFirst:
    def test_target_moves_to_front(self, pop_small):
        multi = next(s for s in pop_small if s.n_members >= 2 and s.target_index != 0)
        rotated = make_target_first(multi)
        assert rotated.target_index == 0
        assert rotated.members[0] == multi.members[multi.target_index]
        assert rotated.chain == multi.chain
        assert sorted(p.attributes for p in rotated.real_members()) == \
            sorted(p.attributes for p in multi.real_members())

    def test_identity_when_already_first(self, pop_small):
        s = next(s for s in pop_small if s.target_index == 0)
        assert make_target_first(s) == s


class TestBuildingBlocks:
    def test_sinusoidal_encoding_values(self):
        pe = sinusoidal_encoding(10, 8)
        assert pe.shape == (10, 8)
        assert pe[0] == pytest.approx(np.array([0, 1, 0, 1, 0, 1, 0, 1.0]))
        assert pe[3, 0] == pytest.approx(np.sin(3.0))
        assert pe[3, 1] == pytest.approx(np.cos(3.0))
        assert np.abs(pe).max() <= 1.0

    def test_layer_norm_standardizes(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(3, 7)) * 4 + 2
        y, _ = layer_norm(x, np.ones(7), np.zeros(7))
        assert y.mean(axis=-1) == pytest.approx(np.zeros(3), abs=1e-9)
        assert y.std(axis=-1) == pytest.approx(np.ones(3), rel=1e-6)

    def test_dropout_eval_is_identity(self):
        x = np.ones((4, 4))
        y, _ = dropout(x, 0.5, train=False, rng=None)
        assert y == pytest.approx(x)
        y2, _ = dropout(x, 0.0, train=True, rng=np.random.default_rng(0))
        assert y2 == pytest.approx(x)

    def test_dropout_train_scales_survivors(self):
        rng = np.random.default_rng(3)
        x = np.ones((100, 100))
        y, _ = dropout(x, 0.25, train=True, rng=rng)
        kept = y != 0.0
        assert 0.70 < kept.mean() < 0.80
        assert y[kept] == pytest.approx(np.full(int(kept.sum()), 1 / 0.75))

    def test_make_batch_rejects_empty(self, tiny_config):
        with pytest.raises(ValueError):
            make_batch([], tiny_config)
