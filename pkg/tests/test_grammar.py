"""Synthetic survey grammars: validity, determinism, declared vs realized laws."""
from __future__ import annotations

import numpy as np
import pytest

from actigen.core import ActivityType, validate_chain
from actigen.errors import ConfigError
from actigen.grammar import (
    SyntheticGrammar,
    make_reference_grammar,
    make_shifted_grammar,
    synth_population,
)


class TestPopulationShape:
    def test_requested_size_and_household_structure(self, grammar_a):
        pop = synth_population(grammar_a, 137, seed=2)
        assert len(pop) == 137
        sizes: dict[str, int] = {}
        for s in pop:
            sizes[s.household_id] = sizes.get(s.household_id, 0) + 1
        assert all(1 <= n <= 5 for n in sizes.values())
        # One sample per member: target indices within a household are distinct.
        seen: dict[str, set[int]] = {}
        for s in pop:
            assert s.target_index not in seen.setdefault(s.household_id, set())
            seen[s.household_id].add(s.target_index)

    def test_attributes_within_cardinalities(self, grammar_a, pop_small, schema):
        for s in pop_small:
            for profile in s.real_members():
                assert len(profile.attributes) == 26
                for value, spec in zip(profile.attributes, schema.attributes):
                    assert 0 <= value < spec.cardinality

    def test_both_day_kinds_present(self, pop_small):
        weekdays = {s.weekday for s in pop_small}
        assert weekdays == {0, 1}


class TestChainValidity:
    def test_reference_chains_valid_by_construction(self, grammar_a):
        pop = synth_population(grammar_a, 2000, seed=31)
        bad = [validate_chain(s.chain) for s in pop if validate_chain(s.chain)]
        assert bad == []

    def test_shifted_chains_valid_by_construction(self, grammar_b):
        pop = synth_population(grammar_b, 1000, seed=32)
        assert all(not validate_chain(s.chain) for s in pop)

    def test_every_day_starts_at_home(self, pop_small):
        # All segment processes put their entire first-activity mass on Home.
        for s in pop_small:
            assert s.chain[0].kind == ActivityType.HOME
            assert s.chain[0].start == 1

    def test_chain_lengths_bounded(self, grammar_a, pop_small):
        assert all(1 <= len(s.chain) <= grammar_a.max_len for s in pop_small)


class TestDeterminism:
    def test_same_seed_same_population(self, grammar_a):
        assert synth_population(grammar_a, 64, seed=9) == synth_population(grammar_a, 64, seed=9)

    def test_different_seeds_differ(self, grammar_a):
        assert synth_population(grammar_a, 64, seed=9) != synth_population(grammar_a, 64, seed=10)

    def test_id_prefix_separates_populations(self, grammar_a):
        pop = synth_population(grammar_a, 20, seed=1, id_prefix="X")
        assert all(s.household_id.startswith("X") for s in pop)


class TestSerialization:
    def test_json_round_trip(self, grammar_a):
        text = grammar_a.to_json()
        again = SyntheticGrammar.from_json(text)
        assert again.to_json() == text
        assert again.segments.keys() == grammar_a.segments.keys()

    def test_load_from_file(self, tmp_path, grammar_a):
        path = tmp_path / "grammar.json"
        path.write_text(grammar_a.to_json())
        loaded = SyntheticGrammar.load(path)
        assert synth_population(loaded, 30, seed=4) == synth_population(grammar_a, 30, seed=4)

    def test_corrupt_grammar_rejected(self, grammar_a):
        import json

        doc = json.loads(grammar_a.to_json())
        doc["weekday_prob"] = 1.5
        with pytest.raises(ConfigError):
            SyntheticGrammar.from_json(json.dumps(doc))


class TestShiftedGrammar:
    def test_vocabulary_shift(self, grammar_a, grammar_b):
        pop_a = synth_population(grammar_a, 3000, seed=77)
        pop_b = synth_population(grammar_b, 3000, seed=77)
        kinds_a = {a.kind for s in pop_a for a in s.chain}
        kinds_b = {a.kind for s in pop_b for a in s.chain}
        assert ActivityType.SOMETHING_ELSE not in kinds_a
        assert ActivityType.SOMETHING_ELSE in kinds_b

    def test_distributions_differ(self, grammar_a, grammar_b):
        pop_a = synth_population(grammar_a, 3000, seed=78)
        pop_b = synth_population(grammar_b, 3000, seed=78)

        def start_hist(pop):
            h = np.zeros(97)
            for s in pop:
                for a in s.chain:
                    h[a.start] += 1
            return h / h.sum()

        l1 = np.abs(start_hist(pop_a) - start_hist(pop_b)).sum()
        assert l1 > 0.05


@pytest.mark.slow
class TestRealizedLaws:
    """Large-sample agreement between declared and realized statistics."""

    def test_transitions_match_declaration(self, grammar_a):
        pop = synth_population(grammar_a, 50_000, seed=51)
        counts: dict[str, np.ndarray] = {}
        for s in pop:
            key = grammar_a.classify(s.members[s.target_index].attributes, s.weekday)
            proc = grammar_a.segments[key]
            k = len(proc.types)
            row_of = {t: i for i, t in enumerate(proc.types)}
            mat = counts.setdefault(key, np.zeros((k, k)))
            for prev, cur in zip(s.chain, s.chain[1:]):
                mat[row_of[prev.kind], row_of[cur.kind]] += 1

        # Emitted transitions are plain inverse-CDF draws from the declared
        # rows, so each cell is binomial; 4.5 sigma over ~160 cells keeps the
        # family-wise false-alarm probability below 0.2%.
        checked = 0
        for key, mat in counts.items():
            declared = np.asarray(grammar_a.segments[key].transition)
            for i in range(mat.shape[0]):
                n = mat[i].sum()
                if n < 2500:
                    continue
                realized = mat[i] / n
                sigma = np.sqrt(declared[i] * (1.0 - declared[i]) / n)
                assert (np.abs(realized - declared[i]) <= 4.5 * sigma + 2e-3).all(), (key, i)
                checked += 1
        assert checked >= 10

    def test_household_sizes_match_declaration(self, grammar_a):
        pop = synth_population(grammar_a, 50_000, seed=52)
        sizes: dict[str, int] = {}
        for s in pop:
            sizes[s.household_id] = sizes.get(s.household_id, 0) + 1
        hist = np.bincount(list(sizes.values()), minlength=6)[1:6]
        realized = hist / hist.sum()
        declared = np.asarray(grammar_a.household_size_probs)
        assert np.abs(realized - declared).max() < 0.02
