"""Chain primitives: activity codes, validation rules, mode features."""
from __future__ import annotations

import pytest

from actigen.core import (
    ACTIVITY_LABELS,
    LABEL_TO_CODE,
    MAX_HOUSEHOLD_MEMBERS,
    N_ACTIVITY_TYPES,
    N_DURATION_BINS,
    N_SLOTS,
    TYPE_EOS,
    TYPE_PAD,
    TYPE_SOS,
    Activity,
    ActivityType,
    chain_from_triples,
    chain_to_triples,
    duration_bin,
    duration_slots,
    is_valid_slot,
    is_valid_type_code,
    mode_features,
    validate_chain,
)


def chain(*triples):
    return chain_from_triples(triples)


class TestConstants:
    def test_taxonomy_size_and_codes(self):
        assert N_SLOTS == 96
        assert N_ACTIVITY_TYPES == 15
        assert MAX_HOUSEHOLD_MEMBERS == 5
        codes = [int(t) for t in ActivityType]
        assert codes == list(range(1, 16))
        assert ActivityType.HOME == 1
        assert ActivityType.WORK == 2
        assert ActivityType.DROP_OFF_PICK_UP == 15

    def test_special_tokens_outside_taxonomy(self):
        assert TYPE_PAD == 0
        assert TYPE_SOS == N_ACTIVITY_TYPES + 1
        assert TYPE_EOS == N_ACTIVITY_TYPES + 2
        for code in (TYPE_PAD, TYPE_SOS, TYPE_EOS):
            assert not is_valid_type_code(code)

    def test_labels_cover_taxonomy(self):
        assert set(ACTIVITY_LABELS) == set(ActivityType)
        assert LABEL_TO_CODE["Home"] == 1
        assert len(set(ACTIVITY_LABELS.values())) == N_ACTIVITY_TYPES

    def test_slot_range(self):
        assert is_valid_slot(1) and is_valid_slot(96)
        assert not is_valid_slot(0) and not is_valid_slot(97)


class TestActivity:
    def test_duration_is_inclusive(self):
        assert Activity(1, 5, 5).duration() == 1
        assert Activity(1, 1, 96).duration() == 96
        assert duration_slots(Activity(2, 10, 13)) == 4

    def test_triples_round_trip(self):
        c = chain((1, 1, 30), (2, 33, 60), (1, 62, 96))
        assert chain_from_triples(chain_to_triples(c)) == c
        assert chain_to_triples(c) == [[1, 1, 30], [2, 33, 60], [1, 62, 96]]


class TestValidateChain:
    def test_clean_chain_passes(self):
        c = chain((1, 1, 30), (2, 33, 60), (7, 61, 64), (1, 66, 96))
        assert validate_chain(c) == []

    def test_empty_chain_passes(self):
        assert validate_chain(()) == []

    def test_same_slot_transition_allowed(self):
        c = chain((1, 1, 30), (2, 30, 60))
        assert validate_chain(c) == []

    def test_gap_between_activities_allowed(self):
        c = chain((1, 1, 30), (2, 40, 60))
        assert validate_chain(c) == []

    def test_partial_day_coverage_allowed(self):
        assert validate_chain(chain((2, 30, 60),)) == []

    def test_reversed_activity(self):
        vs = validate_chain(chain((1, 1, 30), (2, 50, 40)))
        assert [v.rule for v in vs] == ["reversed"]
        assert vs[0].index == 1

    def test_overlap(self):
        vs = validate_chain(chain((1, 1, 40), (2, 35, 60)))
        assert [v.rule for v in vs] == ["overlap"]
        assert vs[0].index == 1

    def test_slot_out_of_range(self):
        vs = validate_chain(chain((1, 0, 30),))
        assert "slot_range" in {v.rule for v in vs}
        vs = validate_chain(chain((1, 90, 97),))
        assert "slot_range" in {v.rule for v in vs}

    def test_special_code_rejected(self):
        for code in (TYPE_PAD, TYPE_SOS, TYPE_EOS):
            vs = validate_chain(chain((code, 1, 10),))
            assert "special_code" in {v.rule for v in vs}

    def test_multiple_violations_accumulate(self):
        c = chain((1, 1, 40), (0, 35, 30))
        rules = sorted(v.rule for v in validate_chain(c))
        assert rules == ["overlap", "reversed", "special_code"]


class TestModeFeatures:
    def test_home_endpoints_excluded(self):
        c = chain((1, 1, 30), (2, 33, 60), (1, 62, 96))
        kind, dur_bin, length = mode_features(c)
        assert kind == 2
        assert dur_bin == duration_bin(28)
        assert length == 3

    def test_all_home_day_falls_back_to_full_chain(self):
        c = chain((1, 1, 40), (1, 50, 96))
        kind, dur_bin, length = mode_features(c)
        assert kind == 1
        assert length == 2

    def test_tie_broken_by_total_duration(self):
        # One long work episode vs one short meal: work carries more time.
        c = chain((1, 1, 20), (2, 22, 60), (7, 62, 65), (1, 70, 96))
        assert mode_features(c)[0] == 2

    def test_empty_chain_raises(self):
        with pytest.raises(ValueError):
            mode_features(())

    def test_duration_bins(self):
        assert duration_bin(1) == 1
        assert duration_bin(12) == 1
        assert duration_bin(13) == 2
        assert duration_bin(96) == N_DURATION_BINS
