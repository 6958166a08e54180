"""Evaluation metrics: JSD, histograms, transition structure, OD scores."""
from __future__ import annotations

import json

import numpy as np
import pytest

from actigen.core import chain_from_triples
from actigen.metrics import (
    END_STATE,
    START_STATE,
    Histogram,
    MetricsReport,
    chain_histograms,
    completeness,
    frobenius,
    jsd,
    od_cosine,
    od_count_mape,
    report,
    transition_matrix,
    write_histogram_csv,
)


def chains(*specs):
    return [chain_from_triples(tr) for tr in specs]


class TestHistogram:
    def test_from_values_normalizes(self):
        h = Histogram.from_values("x", [1, 1, 2, 5])
        assert h.support == (1, 2, 5)
        assert h.masses == (0.5, 0.25, 0.25)
        assert sum(h.masses) == pytest.approx(1.0)

    def test_explicit_support_keeps_zeros(self):
        h = Histogram.from_values("x", [2, 2], support=range(1, 5))
        assert h.support == (1, 2, 3, 4)
        assert h.masses == (0.0, 1.0, 0.0, 0.0)

    def test_empty_histogram_is_all_zero(self):
        h = Histogram.from_values("x", [], support=[1, 2])
        assert h.masses == (0.0, 0.0)

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            Histogram("x", (1,), (-0.5,))

    def test_csv_export(self, tmp_path):
        h = Histogram.from_values("x", [1, 1, 3])
        path = tmp_path / "h.csv"
        write_histogram_csv(h, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "bin,mass"
        assert len(lines) == 3
        b, m = lines[1].split(",")
        assert int(b) == 1 and float(m) == pytest.approx(2 / 3)


class TestJsd:
    def test_identical_is_zero(self):
        p = Histogram.from_values("p", [1, 2, 2, 3])
        assert jsd(p, p) == 0.0

    def test_disjoint_is_one(self):
        p = Histogram.from_values("p", [1, 1])
        q = Histogram.from_values("q", [2, 3])
        assert jsd(p, q) == pytest.approx(1.0, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = rng.dirichlet(np.ones(6))
            q = rng.dirichlet(np.ones(6))
            assert jsd(p, q) == pytest.approx(jsd(q, p), abs=1e-14)

    def test_bounded_in_unit_interval(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p = rng.dirichlet(np.ones(8))
            q = rng.dirichlet(np.ones(8))
            assert 0.0 <= jsd(p, q) <= 1.0

    def test_mismatched_supports_are_aligned(self):
        p = Histogram.from_values("p", [1, 2])
        q = Histogram.from_values("q", [2, 3])
        # Half the mass agrees on bin 2; the rest is disjoint.
        val = jsd(p, q)
        assert 0.0 < val < 1.0

    def test_matches_scipy(self):
        scipy_spatial = pytest.importorskip("scipy.spatial")
        rng = np.random.default_rng(2)
        for _ in range(25):
            p = rng.dirichlet(np.ones(10))
            q = rng.dirichlet(np.ones(10))
            expected = scipy_spatial.distance.jensenshannon(p, q, base=2) ** 2
            assert jsd(p, q) == pytest.approx(float(expected), abs=1e-10)


class TestChainHistograms:
    def test_keys_and_contents(self):
        cs = chains([(1, 1, 40), (2, 42, 70), (1, 72, 96)])
        hs = chain_histograms(cs)
        assert set(hs) == {"length", "duration", "start", "end", "type"}
        assert hs["length"].as_dict() == {3: 1.0}
        assert hs["type"].as_dict()[1] == pytest.approx(2 / 3)
        # Durations are inclusive slot counts: 40, 29, 25.
        assert set(hs["duration"].support) >= {25, 29, 40}

    def test_invalid_durations_surface_as_new_bins(self):
        # A reversed activity has non-positive duration and must not be
        # silently dropped; it lands in its own histogram bin.
        cs = chains([(1, 50, 40)])
        hs = chain_histograms(cs)
        assert min(hs["duration"].support) <= 0


class TestTransitionMatrix:
    def test_counts_with_virtual_nodes(self):
        cs = chains(
            [(1, 1, 40), (2, 42, 70), (1, 72, 96)],
            [(1, 1, 50), (5, 52, 60)],
        )
        tm = transition_matrix(cs)
        assert tm.counts[START_STATE, 1] == 2
        assert tm.counts[1, 2] == 1
        assert tm.counts[2, 1] == 1
        assert tm.counts[1, 5] == 1
        assert tm.counts[1, END_STATE] == 1
        assert tm.counts[5, END_STATE] == 1

    def test_rows_are_stochastic_or_flagged(self):
        cs = chains([(1, 1, 40), (2, 42, 96)])
        tm = transition_matrix(cs)
        sums = tm.probs.sum(axis=1)
        for i, flag in enumerate(tm.row_mask):
            if flag:
                assert sums[i] == pytest.approx(1.0)
            else:
                assert sums[i] == 0.0
        assert not tm.row_mask[END_STATE]

    def test_completeness_is_recall_against_truth(self):
        truth = transition_matrix(chains(
            [(1, 1, 40), (2, 42, 70), (1, 72, 96)],
            [(1, 1, 50), (5, 52, 60), (1, 62, 96)],
        ))
        # Generated covers the work loop but never the shopping trip.
        gen = transition_matrix(chains([(1, 1, 40), (2, 42, 70), (1, 72, 96)]))
        node, edge = completeness(gen, truth)
        # Percent units; virtual START/END are not nodes.  Truth uses types
        # {1, 2, 5}, generated only {1, 2}.
        assert node == pytest.approx(100 * 2 / 3)
        truth_edges = int((truth.counts > 0).sum())
        gen_hits = int(((gen.counts > 0) & (truth.counts > 0)).sum())
        assert edge == pytest.approx(100 * gen_hits / truth_edges)

    def test_extra_generated_edges_do_not_help(self):
        truth = transition_matrix(chains([(1, 1, 40), (2, 42, 96)]))
        gen = transition_matrix(chains(
            [(1, 1, 40), (2, 42, 96)],
            [(1, 1, 10), (9, 12, 20), (10, 22, 96)],
        ))
        node, edge = completeness(gen, truth)
        assert node == 100.0
        assert edge == 100.0

    def test_frobenius_zero_for_identical(self):
        tm = transition_matrix(chains([(1, 1, 40), (2, 42, 96)]))
        assert frobenius(tm, tm) == 0.0

    def test_frobenius_positive_for_different(self):
        a = transition_matrix(chains([(1, 1, 40), (2, 42, 96)]))
        b = transition_matrix(chains([(1, 1, 40), (5, 42, 96)]))
        assert frobenius(a, b) > 0.0


class TestOdScores:
    def test_cosine_identical(self):
        od = np.array([[3.0, 1.0], [0.0, 2.0]])
        assert od_cosine(od, od) == pytest.approx(1.0)

    def test_cosine_orthogonal(self):
        a = np.array([[1.0, 0.0], [0.0, 0.0]])
        b = np.array([[0.0, 1.0], [0.0, 0.0]])
        assert od_cosine(a, b) == pytest.approx(0.0)

    def test_mape_ignores_zero_truth_cells(self):
        truth = np.array([[10.0, 0.0], [5.0, 0.0]])
        gen = np.array([[12.0, 99.0], [5.0, 99.0]])
        # Only the two nonzero-truth cells count: |2|/10 and 0/5, in percent.
        assert od_count_mape(gen, truth) == pytest.approx(10.0)


class TestReport:
    def test_report_fields_and_round_trip(self):
        truth = chains(
            [(1, 1, 40), (2, 42, 70), (1, 72, 96)],
            [(1, 1, 50), (5, 52, 60), (1, 62, 96)],
        )
        rep = report(truth, truth)
        assert rep.jsd_length == 0.0
        assert rep.jsd_type == 0.0
        assert rep.node_completeness == 100.0
        assert rep.edge_completeness == 100.0
        assert rep.frobenius == 0.0
        assert rep.od_cosine is None and rep.od_mape is None

        again = MetricsReport.from_json(rep.to_json())
        assert again == rep
        assert json.loads(rep.to_json())["jsd_length"] == 0.0

    def test_report_with_od(self):
        cs = chains([(1, 1, 40), (2, 42, 96)])
        od = np.array([[1.0, 2.0], [3.0, 4.0]])
        rep = report(cs, cs, gen_od=od, truth_od=od)
        assert rep.od_cosine == pytest.approx(1.0)
        assert rep.od_mape == pytest.approx(0.0)

    def test_csv_row_matches_header(self):
        cs = chains([(1, 1, 40), (2, 42, 96)])
        rep = report(cs, cs)
        header = MetricsReport.csv_header()
        row = rep.to_csv_row()
        assert len(header.split(",")) == len(row.split(","))
