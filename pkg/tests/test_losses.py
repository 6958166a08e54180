"""Loss functions: values against hand computations, gradients against
central finite differences (evaluated away from the hinge kinks)."""
from __future__ import annotations

import numpy as np
import pytest

from actigen.model.config import TIME_LOGITS, LossWeights, SoftLabelConfig
from actigen.model.losses import (
    expected_slot,
    log_softmax,
    loss_ce,
    loss_ce_grad,
    loss_order,
    loss_order_grad,
    loss_seq,
    loss_seq_grad,
    loss_soft,
    loss_soft_grad,
    total_loss,
    total_loss_grad,
)

RNG = np.random.default_rng(123)


def random_batch(b=3, t=5, v=12):
    logits = RNG.normal(size=(b, t, v))
    targets = RNG.integers(0, v, size=(b, t))
    mask = RNG.random(size=(b, t)) < 0.8
    mask[:, 0] = True  # keep the mask non-empty
    return logits, targets, mask


def numeric_grad(f, x, eps=1e-6):
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        gf[i] = (up - down) / (2 * eps)
    return g


class TestLogSoftmax:
    def test_normalizes(self):
        z = RNG.normal(size=(4, 7))
        lp = log_softmax(z)
        assert np.exp(lp).sum(axis=-1) == pytest.approx(np.ones(4))

    def test_shift_invariant(self):
        z = RNG.normal(size=(2, 5))
        assert log_softmax(z + 100.0) == pytest.approx(log_softmax(z), abs=1e-12)


class TestCrossEntropy:
    def test_matches_manual_nll(self):
        logits, targets, mask = random_batch()
        lp = log_softmax(logits)
        manual = 0.0
        for b in range(logits.shape[0]):
            for t in range(logits.shape[1]):
                if mask[b, t]:
                    manual -= lp[b, t, targets[b, t]]
        manual /= mask.sum()
        assert loss_ce(logits, targets, mask) == pytest.approx(manual, abs=1e-12)

    def test_gradient(self):
        logits, targets, mask = random_batch(2, 3, 6)
        _, grad = loss_ce_grad(logits, targets, mask)
        num = numeric_grad(lambda: loss_ce(logits, targets, mask), logits)
        assert grad == pytest.approx(num, abs=1e-7)

    def test_masked_positions_have_zero_grad(self):
        logits, targets, mask = random_batch()
        _, grad = loss_ce_grad(logits, targets, mask)
        assert np.all(grad[~mask] == 0.0)

    def test_empty_mask_rejected(self):
        logits, targets, mask = random_batch()
        with pytest.raises(ValueError):
            loss_ce(logits, targets, np.zeros_like(mask))

    def test_shape_mismatch_rejected(self):
        logits, targets, mask = random_batch()
        with pytest.raises(ValueError):
            loss_ce(logits, targets[:, :-1], mask)


class TestSoftLabels:
    def test_degrades_to_cross_entropy_without_sides(self):
        cfg = SoftLabelConfig(side_steps=0, eps=0.0)
        for _ in range(5):
            logits, targets, mask = random_batch()
            assert loss_soft(logits, targets, mask, cfg) == pytest.approx(
                loss_ce(logits, targets, mask), abs=1e-13)

    def test_interior_target_kernel(self):
        # One position, interior target: S puts 1.0 on the target and 0.1
        # on each of the four neighbors, unnormalized.
        cfg = SoftLabelConfig(main_weight=1.0, side_weight=0.1, side_steps=2, eps=0.0)
        logits = RNG.normal(size=(1, 1, 9))
        targets = np.array([[4]])
        mask = np.ones((1, 1), dtype=bool)
        lp = log_softmax(logits)[0, 0]
        manual = -(lp[4] + 0.1 * (lp[2] + lp[3] + lp[5] + lp[6]))
        assert loss_soft(logits, targets, mask, cfg) == pytest.approx(manual, abs=1e-12)

    def test_boundary_target_clips_without_wrap(self):
        cfg = SoftLabelConfig(side_steps=2, eps=0.0)
        logits = RNG.normal(size=(1, 1, 9))
        targets = np.array([[0]])
        mask = np.ones((1, 1), dtype=bool)
        lp = log_softmax(logits)[0, 0]
        manual = -(lp[0] + 0.1 * (lp[1] + lp[2]))  # indices -1, -2 dropped
        assert loss_soft(logits, targets, mask, cfg) == pytest.approx(manual, abs=1e-12)

    def test_gradient_with_eps(self):
        cfg = SoftLabelConfig()  # default eps keeps log(p + eps) smooth
        logits, targets, mask = random_batch(2, 3, 8)
        _, grad = loss_soft_grad(logits, targets, mask, cfg)
        num = numeric_grad(lambda: loss_soft(logits, targets, mask, cfg), logits)
        assert grad == pytest.approx(num, abs=1e-7)

    def test_side_weight_zero_matches_plain_kernel(self):
        cfg = SoftLabelConfig(side_weight=0.0, eps=0.0)
        logits, targets, mask = random_batch()
        assert loss_soft(logits, targets, mask, cfg) == pytest.approx(
            loss_ce(logits, targets, mask), abs=1e-13)


class TestExpectedSlot:
    def test_matches_manual_expectation(self):
        logits = RNG.normal(size=(2, 3, TIME_LOGITS))
        probs = np.exp(log_softmax(logits))
        manual = (probs * np.arange(1, TIME_LOGITS + 1)).sum(axis=-1)
        assert expected_slot(logits) == pytest.approx(manual, abs=1e-10)

    def test_concentrated_logits_give_slot_value(self):
        logits = np.full((1, 1, TIME_LOGITS), -40.0)
        logits[0, 0, 29] = 40.0  # slot 30
        assert expected_slot(logits)[0, 0] == pytest.approx(30.0, abs=1e-6)


def concentrated(slots, v=TIME_LOGITS, sharpness=30.0):
    """Logits whose softmax is a near-delta on each given slot (1-based)."""
    out = np.full((1, len(slots), v), -sharpness / 2)
    for i, s in enumerate(slots):
        out[0, i, s - 1] = sharpness / 2
    return out


class TestHinges:
    def test_order_zero_on_sorted_sequence(self):
        ls = concentrated([10, 40, 70])
        le = concentrated([30, 60, 90])
        mask = np.ones((1, 3), dtype=bool)
        assert loss_order(ls, le, mask) == pytest.approx(0.0, abs=1e-6)
        assert loss_seq(ls, le, mask) == pytest.approx(0.0, abs=1e-6)

    def test_order_penalizes_overlap(self):
        # Second activity starts (exp. slot 20) before the first ends (40).
        ls = concentrated([10, 20])
        le = concentrated([40, 60])
        mask = np.ones((1, 2), dtype=bool)
        assert loss_order(ls, le, mask) == pytest.approx(20.0 / 2, abs=1e-3)

    def test_seq_penalizes_reversed_activity(self):
        ls = concentrated([50])
        le = concentrated([30])
        mask = np.ones((1, 1), dtype=bool)
        assert loss_seq(ls, le, mask) == pytest.approx(20.0, abs=1e-3)
        assert loss_order(ls, le, mask) == 0.0  # single activity: no pairs

    def test_gradients_away_from_kinks(self):
        # Strict overlaps keep the hinge active so there is no kink nearby.
        ls = concentrated([10, 20], sharpness=6.0)
        le = concentrated([40, 60], sharpness=6.0)
        mask = np.ones((1, 2), dtype=bool)
        _, gs, ge = loss_order_grad(ls, le, mask)
        num_s = numeric_grad(lambda: loss_order(ls, le, mask), ls)
        num_e = numeric_grad(lambda: loss_order(ls, le, mask), le)
        assert gs == pytest.approx(num_s, abs=1e-5)
        assert ge == pytest.approx(num_e, abs=1e-5)

        ls2 = concentrated([50], sharpness=6.0)
        le2 = concentrated([30], sharpness=6.0)
        mask1 = np.ones((1, 1), dtype=bool)
        _, gs2, ge2 = loss_seq_grad(ls2, le2, mask1)
        assert gs2 == pytest.approx(numeric_grad(lambda: loss_seq(ls2, le2, mask1), ls2), abs=1e-5)
        assert ge2 == pytest.approx(numeric_grad(lambda: loss_seq(ls2, le2, mask1), le2), abs=1e-5)


class TestTotalLoss:
    def make_inputs(self, b=2, t=4):
        lt = RNG.normal(size=(b, t, 18))
        ls = RNG.normal(size=(b, t, TIME_LOGITS))
        le = RNG.normal(size=(b, t, TIME_LOGITS))
        tt = RNG.integers(0, 18, size=(b, t))
        ts = RNG.integers(0, TIME_LOGITS, size=(b, t))
        te = RNG.integers(0, TIME_LOGITS, size=(b, t))
        mask = np.ones((b, t), dtype=bool)
        return lt, ls, le, tt, ts, te, mask

    def test_composition_identity(self):
        lt, ls, le, tt, ts, te, mask = self.make_inputs()
        w = LossWeights(w_type=0.7, w_start=1.3, w_end=0.5, w_order=0.2, w_seq=0.9)
        soft = SoftLabelConfig()
        total, parts = total_loss(lt, ls, le, tt, ts, te, mask, mask, w, soft)
        manual = (w.w_type * loss_ce(lt, tt, mask)
                  + w.w_start * loss_soft(ls, ts, mask, soft)
                  + w.w_end * loss_soft(le, te, mask, soft)
                  + w.w_order * loss_order(ls, le, mask)
                  + w.w_seq * loss_seq(ls, le, mask))
        assert total == pytest.approx(manual, abs=1e-12)
        assert set(parts) == {"type", "start", "end", "order", "seq"}

    def test_linear_in_weights(self):
        lt, ls, le, tt, ts, te, mask = self.make_inputs()
        base = dict(w_type=0.3, w_start=0.8, w_end=1.1, w_order=0.05, w_seq=0.4)
        total1, parts = total_loss(lt, ls, le, tt, ts, te, mask, mask,
                                   LossWeights(**base))
        reconstructed = (base["w_type"] * parts["type"]
                         + base["w_start"] * parts["start"]
                         + base["w_end"] * parts["end"]
                         + base["w_order"] * parts["order"]
                         + base["w_seq"] * parts["seq"])
        assert total1 == pytest.approx(reconstructed, abs=1e-12)
        doubled, _ = total_loss(lt, ls, le, tt, ts, te, mask, mask,
                                LossWeights(**{k: 2 * v for k, v in base.items()}))
        assert doubled == pytest.approx(2 * total1, abs=1e-10)

    def test_gradients(self):
        lt, ls, le, tt, ts, te, mask = self.make_inputs(b=1, t=3)
        w = LossWeights()
        soft = SoftLabelConfig()
        _, _, dt, ds, de = total_loss_grad(lt, ls, le, tt, ts, te, mask, mask, w, soft)

        def val():
            return total_loss(lt, ls, le, tt, ts, te, mask, mask, w, soft)[0]

        assert dt == pytest.approx(numeric_grad(val, lt), abs=1e-6)
        assert ds == pytest.approx(numeric_grad(val, ls), abs=1e-6)
        assert de == pytest.approx(numeric_grad(val, le), abs=1e-6)
