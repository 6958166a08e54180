"""Raking and relax-and-rake balancing over chain mode features."""
from __future__ import annotations

import numpy as np
import pytest

from actigen.balance import (
    FEATURES,
    BalanceConfig,
    Distribution,
    balance,
    compute_distribution,
    distribution_distance,
    export_weights_csv,
    extract_features,
    ideal_distribution,
    rake,
    relax_target,
    resample,
)
from actigen.errors import BalanceError


class TestDistribution:
    def test_shares_must_normalize(self):
        with pytest.raises(ValueError):
            Distribution("f", (1, 2), (0.5, 0.6))
        with pytest.raises(ValueError):
            Distribution("f", (1, 1), (0.5, 0.5))
        d = Distribution("f", (1, 2), (0.25, 0.75))
        assert d.share_of(2) == 0.75
        assert d.share_of(9) == 0.0

    def test_compute_distribution_counts(self, pop_small):
        d = compute_distribution(pop_small, "length")
        feats = extract_features(pop_small)
        lengths = feats[:, FEATURES.index("length")]
        for cls, share in zip(d.classes, d.shares):
            assert share == pytest.approx((lengths == cls).mean())

    def test_compute_distribution_weighted(self, pop_small):
        w = np.zeros(len(pop_small))
        w[0] = 1.0
        d = compute_distribution(pop_small, "length", w)
        target_len = len(pop_small[0].chain)
        assert d.share_of(target_len) == pytest.approx(1.0)

    def test_unknown_feature_rejected(self, pop_small):
        with pytest.raises(BalanceError):
            compute_distribution(pop_small, "shoe_size")

    def test_ideal_is_uniform_over_realized_classes(self, pop_small):
        d = compute_distribution(pop_small, "mode_type")
        ideal = ideal_distribution(d)
        assert ideal.classes == d.classes
        assert all(s == pytest.approx(1 / len(d.classes)) for s in ideal.shares)

    def test_relax_target_is_convex_step(self):
        cur = Distribution("f", (1, 2), (0.9, 0.1))
        ideal = Distribution("f", (1, 2), (0.5, 0.5))
        stepped = relax_target(cur, ideal, 0.25)
        assert stepped.shares[0] == pytest.approx(0.9 + 0.25 * (0.5 - 0.9))
        assert sum(stepped.shares) == pytest.approx(1.0)

    def test_distribution_distance_is_jsd(self):
        a = Distribution("f", (1, 2), (1.0, 0.0))
        b = Distribution("f", (1, 2), (0.0, 1.0))
        assert distribution_distance(a, b) == pytest.approx(1.0)
        assert distribution_distance(a, a) == 0.0


class TestExtractFeatures:
    def test_shape_and_columns(self, pop_small):
        feats = extract_features(pop_small)
        assert feats.shape == (len(pop_small), len(FEATURES))
        lengths = feats[:, FEATURES.index("length")]
        assert all(lengths[i] == len(s.chain) for i, s in enumerate(pop_small))


class TestRake:
    def test_hits_feasible_marginals(self, pop_small):
        current = compute_distribution(pop_small, "length")
        ideal = ideal_distribution(current)
        target = relax_target(current, ideal, 0.5)
        result = rake(pop_small, {"length": target}, tol=1e-8)
        assert result.converged
        w = result.weights.as_array()
        realized = compute_distribution(pop_small, "length", w)
        for cls in target.classes:
            assert realized.share_of(cls) == pytest.approx(target.share_of(cls), abs=1e-7)

    def test_single_feature_converges_in_one_sweep(self, pop_small):
        current = compute_distribution(pop_small, "mode_type")
        ideal = ideal_distribution(current)
        target = relax_target(current, ideal, 0.3)
        result = rake(pop_small, {"mode_type": target})
        assert result.converged
        assert len(result.sweep_errors) <= 2

    def test_infeasible_target_rejected(self, pop_small):
        # Mass on a chain length no sample realizes.
        target = Distribution("length", (77,), (1.0,))
        with pytest.raises(BalanceError, match="infeasible"):
            rake(pop_small, {"length": target})

    def test_weights_stay_positive(self, pop_small):
        targets = {f: relax_target(compute_distribution(pop_small, f),
                                   ideal_distribution(compute_distribution(pop_small, f)),
                                   0.2)
                   for f in FEATURES}
        result = rake(pop_small, targets)
        assert (result.weights.as_array() > 0).all()

    def test_bad_initial_weights_rejected(self, pop_small):
        target = compute_distribution(pop_small, "length")
        with pytest.raises(BalanceError):
            rake(pop_small, {"length": target}, initial_weights=np.ones(3))


class TestBalance:
    def test_moves_marginals_toward_uniform(self, pop_small):
        before = {f: compute_distribution(pop_small, f) for f in FEATURES}
        result = balance(pop_small, BalanceConfig(step_size=0.2, threshold=0.05,
                                                  max_iterations=50))
        w = result.weights.as_array()
        for f in FEATURES:
            ideal = ideal_distribution(before[f])
            after = compute_distribution(pop_small, f, w)
            assert distribution_distance(after, ideal) < distribution_distance(before[f], ideal)
        assert result.log
        assert result.log[0]["iteration"] == 0

    def test_empty_input_rejected(self):
        with pytest.raises(BalanceError):
            balance([])


class TestResample:
    def test_size_and_determinism(self, pop_small):
        w = np.ones(len(pop_small))
        a = resample(pop_small, w, 50, seed=4)
        b = resample(pop_small, w, 50, seed=4)
        assert len(a) == 50
        assert a == b
        assert a != resample(pop_small, w, 50, seed=5)

    def test_respects_weights(self, pop_small):
        w = np.zeros(len(pop_small))
        w[7] = 1.0
        drawn = resample(pop_small, w, 20, seed=0)
        assert all(s == pop_small[7] for s in drawn)

    def test_zero_total_weight_rejected(self, pop_small):
        with pytest.raises(BalanceError):
            resample(pop_small, np.zeros(len(pop_small)), 10, seed=0)


class TestWeightsCsv:
    def test_export_layout(self, tmp_path, pop_small):
        result = rake(pop_small, {"length": compute_distribution(pop_small, "length")})
        path = tmp_path / "weights.csv"
        export_weights_csv(result.weights, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "sample_id,weight"
        assert len(lines) == len(pop_small) + 1
