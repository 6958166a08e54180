"""Survey ingestion: time codes, CSV parsing, serialization, splitting."""
from __future__ import annotations

from pathlib import Path

import pytest

from actigen.core import AgentProfile, chain_from_triples
from actigen.errors import IngestError
from actigen.ingest import (
    EncodedSample,
    decode_time,
    encode_time,
    load_csv,
    make_sample,
    read_samples,
    save_csv,
    split,
    write_samples,
)

FIXTURE = Path(__file__).parent / "data" / "diaries_small.csv"


class TestTimeCodes:
    def test_known_values(self):
        assert encode_time(0) == 1
        assert encode_time(14) == 1
        assert encode_time(15) == 2
        assert encode_time(719) == 48  # noon boundary
        assert encode_time(1439) == 96

    def test_decode_is_left_inverse(self):
        for slot in (1, 2, 48, 96):
            assert encode_time(decode_time(slot)) == slot
        assert decode_time(1) == 0
        assert decode_time(96) == 1425

    def test_out_of_range_rejected(self):
        with pytest.raises(IngestError):
            encode_time(-1)
        with pytest.raises(IngestError):
            encode_time(1440)
        with pytest.raises(IngestError):
            decode_time(0)
        with pytest.raises(IngestError):
            decode_time(97)


class TestLoadCsv:
    def test_fixture_parses_to_expected_samples(self, schema):
        samples = load_csv(FIXTURE, schema)
        assert len(samples) == 3
        by_key = {(s.household_id, s.target_index): s for s in samples}
        p1 = by_key[("h1", 0)]
        p2 = by_key[("h1", 1)]
        p9 = by_key[("h2", 0)]

        # Hand-computed slots from the minute columns of the fixture.
        assert [(a.kind, a.start, a.end) for a in p1.chain] == [
            (1, 1, 30), (2, 32, 67), (1, 70, 96)]
        assert [(a.kind, a.start, a.end) for a in p2.chain] == [
            (1, 1, 35), (5, 37, 40), (1, 42, 96)]
        assert [(a.kind, a.start, a.end) for a in p9.chain] == [
            (1, 1, 36), (9, 39, 48), (7, 50, 53), (1, 55, 96)]

        assert p1.weekday == 1 and p2.weekday == 1 and p9.weekday == 0
        # Both h1 samples see the same two member profiles.
        assert p1.members[:2] == p2.members[:2]
        assert p1.chain != p2.chain

    def test_labels_and_codes_are_interchangeable(self, schema):
        samples = load_csv(FIXTURE, schema)
        p2 = next(s for s in samples if s.household_id == "h1" and s.target_index == 1)
        assert p2.chain[1].kind == 5  # "Buy goods" label row

    def test_blank_attributes_fall_back_to_dummy(self, schema):
        samples = load_csv(FIXTURE, schema)
        p9 = next(s for s in samples if s.household_id == "h2")
        attrs = p9.members[0].attributes
        i_job = schema.index_of("job_category")
        i_days = schema.index_of("workdays_per_week")
        assert attrs[i_job] == schema.attributes[i_job].dummy_code
        assert attrs[i_days] == schema.attributes[i_days].dummy_code
        assert attrs[schema.index_of("age_group")] == 5

    def test_member_mask_marks_padding(self, schema):
        samples = load_csv(FIXTURE, schema)
        p1 = next(s for s in samples if s.household_id == "h1" and s.target_index == 0)
        assert list(p1.member_mask) == [1, 1, 0, 0, 0]
        p9 = next(s for s in samples if s.household_id == "h2")
        assert list(p9.member_mask) == [1, 0, 0, 0, 0]

    def test_missing_column_rejected(self, tmp_path, schema):
        bad = tmp_path / "bad.csv"
        bad.write_text("household_id,person_id\nh1,p1\n")
        with pytest.raises(IngestError, match="missing columns"):
            load_csv(bad, schema)

    def test_overlapping_diary_rejected(self, tmp_path, schema):
        text = FIXTURE.read_text().splitlines()
        # Pull p1's work start before the end of the preceding home stay.
        text[2] = text[2].replace("h1,p1,2,465", "h1,p1,2,300")
        bad = tmp_path / "overlap.csv"
        bad.write_text("\n".join(text) + "\n")
        with pytest.raises(IngestError, match="overlap"):
            load_csv(bad, schema)

    def test_bad_weekday_rejected(self, tmp_path, schema):
        text = FIXTURE.read_text().splitlines()
        text[1] = text[1].replace(",449,1,3,", ",449,7,3,")
        bad = tmp_path / "weekday.csv"
        bad.write_text("\n".join(text) + "\n")
        with pytest.raises(IngestError, match="weekday"):
            load_csv(bad, schema)

    def test_attribute_code_out_of_range_rejected(self, tmp_path, schema):
        text = FIXTURE.read_text().splitlines()
        text[1] = text[1].replace(",449,1,3,", ",449,1,9,")  # age_group card. 8
        bad = tmp_path / "attr.csv"
        bad.write_text("\n".join(text) + "\n")
        with pytest.raises(IngestError, match="age_group"):
            load_csv(bad, schema)

    def test_csv_round_trip(self, tmp_path, schema):
        samples = load_csv(FIXTURE, schema)
        out = tmp_path / "again.csv"
        save_csv(samples, out, schema)
        assert load_csv(out, schema) == samples


class TestJsonl:
    def test_round_trip(self, tmp_path, schema, pop_small):
        path = tmp_path / "samples.jsonl"
        write_samples(pop_small, path)
        assert read_samples(path, schema) == pop_small

    def test_deterministic_bytes(self, tmp_path, schema, pop_small):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_samples(pop_small, a)
        write_samples(pop_small, b)
        assert a.read_bytes() == b.read_bytes()


class TestMakeSample:
    def test_padding_and_mask(self, schema):
        profile = AgentProfile(tuple(a.dummy_code for a in schema.attributes))
        chain = chain_from_triples([(1, 1, 96)])
        s = make_sample("h", [profile], 0, chain, 1, schema)
        assert isinstance(s, EncodedSample)
        assert len(s.members) == 5
        assert list(s.member_mask) == [1, 0, 0, 0, 0]
        assert list(s.real_members()) == [profile]

    def test_target_must_be_real_member(self, schema):
        profile = AgentProfile(tuple(a.dummy_code for a in schema.attributes))
        chain = chain_from_triples([(1, 1, 96)])
        with pytest.raises(ValueError):
            make_sample("h", [profile], 1, chain, 1, schema)

    def test_empty_chain_rejected(self, schema):
        profile = AgentProfile(tuple(a.dummy_code for a in schema.attributes))
        with pytest.raises(ValueError):
            make_sample("h", [profile], 0, (), 1, schema)


class TestSplit:
    def test_ratios_and_determinism(self, pop_small):
        tr, va, te = split(pop_small, (0.8, 0.1, 0.1), seed=3)
        assert len(tr) + len(va) + len(te) == len(pop_small)
        # Households are at most five strong, so realized sizes are close.
        assert abs(len(tr) - 0.8 * len(pop_small)) <= 5
        tr2, va2, te2 = split(pop_small, (0.8, 0.1, 0.1), seed=3)
        assert (tr, va, te) == (tr2, va2, te2)

    def test_households_not_torn_apart(self, pop_small):
        tr, va, te = split(pop_small, (0.6, 0.2, 0.2), seed=7)
        parts = [set(s.household_id for s in block) for block in (tr, va, te)]
        assert not (parts[0] & parts[1])
        assert not (parts[0] & parts[2])
        assert not (parts[1] & parts[2])

    def test_seed_changes_assignment(self, pop_small):
        a = split(pop_small, seed=0)[0]
        b = split(pop_small, seed=1)[0]
        assert a != b

    def test_bad_ratios_rejected(self, pop_small):
        with pytest.raises(ValueError):
            split(pop_small, (0.5, 0.5), seed=0)  # type: ignore[arg-type]
        with pytest.raises(ValueError):
            split(pop_small, (-0.1, 0.6, 0.5), seed=0)

    def test_empty_ratio_gives_empty_block(self, pop_small):
        tr, va, te = split(pop_small, (0.95, 0.05, 0.0), seed=1)
        assert te == []
        assert len(tr) + len(va) == len(pop_small)
