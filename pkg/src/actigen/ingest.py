"""Survey ingestion: CSV diaries to encoded samples, splits, and JSONL IO.

One CSV row is one activity episode.  Rows carry the household and person
ids, the activity (label or numeric code), start/end clock minutes, the
weekday flag, and the 26 attribute columns named by the schema.  A sample
is one (household, diary person) pair: the person's chain plus the profiles
of everyone in the household, padded to five members.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    Activity,
    ActivityChain,
    AgentProfile,
    LABEL_TO_CODE,
    MAX_HOUSEHOLD_MEMBERS,
    N_SLOTS,
    SLOT_MINUTES,
    chain_from_triples,
    chain_to_triples,
    is_valid_type_code,
    validate_chain,
)
from .errors import IngestError
from .schema import DatasetSchema

MINUTES_PER_DAY = 24 * 60


def encode_time(minute: int) -> int:
    """Clock minute (0..1439) to 15-minute slot (1..96)."""
    if not 0 <= minute < MINUTES_PER_DAY:
        raise IngestError(f"minute {minute} outside 0..{MINUTES_PER_DAY - 1}")
    return minute // SLOT_MINUTES + 1


def decode_time(slot: int) -> int:
    """First clock minute of a slot; left inverse of encode_time."""
    if not 1 <= slot <= N_SLOTS:
        raise IngestError(f"slot {slot} outside 1..{N_SLOTS}")
    return (slot - 1) * SLOT_MINUTES


@dataclass(frozen=True)
class EncodedSample:
    """One diary person in household context, ready for the model.

    ``members`` always has five profiles; slots beyond the real household
    carry the schema's all-dummy profile and a False bit in ``member_mask``.
    The target (diary) member is ``members[target_index]``.
    """

    household_id: str
    members: tuple[AgentProfile, ...]
    member_mask: tuple[bool, ...]
    target_index: int
    chain: ActivityChain
    weekday: int

    def __post_init__(self) -> None:
        if len(self.members) != MAX_HOUSEHOLD_MEMBERS:
            raise ValueError(f"members must be padded to {MAX_HOUSEHOLD_MEMBERS}")
        if len(self.member_mask) != MAX_HOUSEHOLD_MEMBERS:
            raise ValueError("member_mask length mismatch")
        if not any(self.member_mask):
            raise ValueError("household needs at least one real member")
        if not (0 <= self.target_index < MAX_HOUSEHOLD_MEMBERS and self.member_mask[self.target_index]):
            raise ValueError("target_index must point at a real member")
        if self.weekday not in (0, 1):
            raise ValueError("weekday flag must be 0 or 1")
        if not self.chain:
            raise ValueError("chain must be non-empty")
        violations = validate_chain(self.chain)
        if violations:
            v = violations[0]
            raise ValueError(f"invalid chain at activity {v.index}: {v.rule} ({v.detail})")

    @property
    def n_members(self) -> int:
        return sum(self.member_mask)

    def real_members(self) -> tuple[AgentProfile, ...]:
        return tuple(p for p, m in zip(self.members, self.member_mask) if m)


def make_sample(
    household_id: str,
    members: Sequence[AgentProfile],
    target_index: int,
    chain: ActivityChain,
    weekday: int,
    schema: DatasetSchema,
) -> EncodedSample:
    """Pad a real member list to five profiles and build the sample."""
    n = len(members)
    if not 1 <= n <= MAX_HOUSEHOLD_MEMBERS:
        raise ValueError(f"household must have 1..{MAX_HOUSEHOLD_MEMBERS} members, got {n}")
    pad = AgentProfile(schema.dummy_profile())
    padded = tuple(members) + (pad,) * (MAX_HOUSEHOLD_MEMBERS - n)
    mask = (True,) * n + (False,) * (MAX_HOUSEHOLD_MEMBERS - n)
    return EncodedSample(household_id, padded, mask, target_index, chain, weekday)


def _parse_activity(raw: str, line: int) -> int:
    raw = raw.strip()
    try:
        code = int(raw)
    except ValueError:
        if raw in LABEL_TO_CODE:
            return LABEL_TO_CODE[raw]
        raise IngestError(f"line {line}: unknown activity label {raw!r}") from None
    if not is_valid_type_code(code):
        raise IngestError(f"line {line}: activity code {code} outside 1..15")
    return code


def _parse_int(raw: str, line: int, what: str) -> int:
    try:
        return int(raw.strip())
    except (ValueError, AttributeError):
        raise IngestError(f"line {line}: malformed {what} {raw!r}") from None


def load_csv(path: str | Path, schema: DatasetSchema) -> list[EncodedSample]:
    """Read a diary CSV into encoded samples, one per diary person.

    Missing attribute values fall back to the attribute's dummy code.
    Households with more than five members are truncated per target to the
    target plus the first four other diary members.
    """
    path = Path(path)
    # household id -> person id -> parsed person record
    households: dict[str, dict[str, dict]] = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise IngestError(f"{path}: empty file")
        required = [
            schema.household_id_column,
            schema.person_id_column,
            schema.activity_column,
            schema.start_column,
            schema.end_column,
            schema.weekday_column,
        ] + [schema.column_for(a.name) for a in schema.attributes]
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise IngestError(f"{path}: missing columns {missing}")

        for i, row in enumerate(reader):
            line = i + 2  # header is line 1
            hid = (row[schema.household_id_column] or "").strip()
            pid = (row[schema.person_id_column] or "").strip()
            if not hid or not pid:
                raise IngestError(f"line {line}: missing household or person id")
            kind = _parse_activity(row[schema.activity_column] or "", line)
            start = encode_time(_parse_int(row[schema.start_column], line, "start minute"))
            end = encode_time(_parse_int(row[schema.end_column], line, "end minute"))
            weekday = _parse_int(row[schema.weekday_column], line, "weekday flag")
            if weekday not in (0, 1):
                raise IngestError(f"line {line}: weekday flag must be 0 or 1")

            persons = households.setdefault(hid, {})
            person = persons.get(pid)
            if person is None:
                attrs = []
                for spec in schema.attributes:
                    raw = (row.get(schema.column_for(spec.name)) or "").strip()
                    if raw == "":
                        attrs.append(spec.dummy_code)
                        continue
                    code = _parse_int(raw, line, f"attribute {spec.name}")
                    if not 0 <= code < spec.cardinality:
                        raise IngestError(
                            f"line {line}: attribute {spec.name} code {code} "
                            f"outside 0..{spec.cardinality - 1}"
                        )
                    attrs.append(code)
                person = {
                    "profile": AgentProfile(tuple(attrs)),
                    "weekday": weekday,
                    "acts": [],
                    "line": line,
                }
                persons[pid] = person
            person["acts"].append((start, end, kind, line))

    samples: list[EncodedSample] = []
    for hid, persons in households.items():
        pids = list(persons)
        profiles = [persons[p]["profile"] for p in pids]
        chains = {}
        for p in pids:
            acts = sorted(persons[p]["acts"])
            chain = tuple(Activity(k, s, e) for s, e, k, _ in acts)
            bad = validate_chain(chain)
            if bad:
                v = bad[0]
                raise IngestError(
                    f"household {hid} person {p}: {v.rule} at activity {v.index} ({v.detail})"
                )
            chains[p] = chain
        for ti, p in enumerate(pids):
            if len(pids) <= MAX_HOUSEHOLD_MEMBERS:
                members = profiles
                target = ti
            else:
                others = [profiles[j] for j in range(len(pids)) if j != ti]
                members = [profiles[ti]] + others[: MAX_HOUSEHOLD_MEMBERS - 1]
                target = 0
            samples.append(
                make_sample(hid, members, target, chains[p], persons[p]["weekday"], schema)
            )
    return samples


def save_csv(samples: Iterable[EncodedSample], path: str | Path, schema: DatasetSchema) -> None:
    """Write samples back to the diary CSV layout.

    Assumes one sample per member of each household (as produced by
    load_csv or synth_population); person ids are the member indices.
    """
    path = Path(path)
    by_household: dict[str, list[EncodedSample]] = {}
    for s in samples:
        by_household.setdefault(s.household_id, []).append(s)

    header = [
        schema.household_id_column,
        schema.person_id_column,
        schema.activity_column,
        schema.start_column,
        schema.end_column,
        schema.weekday_column,
    ] + [schema.column_for(a.name) for a in schema.attributes]

    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for hid, group in by_household.items():
            for s in sorted(group, key=lambda s: s.target_index):
                profile = s.members[s.target_index]
                for a in s.chain:
                    writer.writerow(
                        [hid, str(s.target_index), a.kind, decode_time(a.start),
                         decode_time(a.end), s.weekday] + list(profile.attributes)
                    )


def write_samples(samples: Iterable[EncodedSample], path: str | Path) -> None:
    """Canonical JSONL: one sample per line, only real members stored."""
    path = Path(path)
    with path.open("w") as fh:
        for s in samples:
            rec = {
                "household_id": s.household_id,
                "target_index": s.target_index,
                "members": [list(p.attributes) for p in s.real_members()],
                "chain": chain_to_triples(s.chain),
                "weekday": s.weekday,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_samples(path: str | Path, schema: DatasetSchema) -> list[EncodedSample]:
    path = Path(path)
    samples = []
    with path.open() as fh:
        for i, raw in enumerate(fh):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
                samples.append(
                    make_sample(
                        rec["household_id"],
                        [AgentProfile(tuple(m)) for m in rec["members"]],
                        rec["target_index"],
                        chain_from_triples(rec["chain"]),
                        rec["weekday"],
                        schema,
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"{path} line {i + 1}: {exc}") from exc
    return samples


def split(
    samples: Sequence[EncodedSample],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[EncodedSample], list[EncodedSample], list[EncodedSample]]:
    """Deterministic train/val/test split that keeps households together.

    Target sizes come from largest-remainder rounding of the ratios; whole
    households are dealt to the splits in seeded shuffled order, so the
    realized sizes are exact whenever households are singletons and off by
    at most a household otherwise.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise ValueError("ratios must be three non-negative numbers with positive sum")
    total = float(sum(ratios))
    shares = [r / total for r in ratios]

    groups: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        groups.setdefault(s.household_id, []).append(i)
    keys = list(groups)

    n = len(samples)
    raw = [share * n for share in shares]
    counts = [int(x) for x in raw]
    remainder = n - sum(counts)
    order = sorted(range(3), key=lambda k: (-(raw[k] - counts[k]), k))
    for k in order[:remainder]:
        counts[k] += 1

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(keys))

    out: tuple[list[EncodedSample], ...] = ([], [], [])
    need = list(counts)
    which = 0
    for gi in perm:
        members = groups[keys[gi]]
        while which < 2 and need[which] <= 0:
            which += 1
        out[which].extend(samples[i] for i in members)
        need[which] -= len(members)
    return out
