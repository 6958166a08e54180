"""Core domain types: activities, chains, agents, households, trajectories.

Time is discretized into 96 slots of 15 minutes covering one day; slot 1 is
00:00-00:15 and slot 96 is 23:45-00:00.  An activity occupies a closed slot
interval [start, end], so its duration in slots is end - start + 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

N_SLOTS = 96
SLOT_MINUTES = 15
N_ACTIVITY_TYPES = 15
MAX_HOUSEHOLD_MEMBERS = 5

# Special vocabulary codes used by the sequence model; they never appear
# inside a validated chain.
TYPE_PAD = 0
TYPE_SOS = 16
TYPE_EOS = 17


class ActivityType(IntEnum):
    """The 15-category activity taxonomy, coded 1..15."""

    HOME = 1
    WORK = 2
    SCHOOL = 3
    CARE_GIVING = 4
    BUY_GOODS = 5
    BUY_SERVICES = 6
    BUY_MEALS = 7
    GENERAL_ERRANDS = 8
    RECREATIONAL = 9
    EXERCISE = 10
    VISIT_FRIENDS = 11
    HEALTH_CARE = 12
    RELIGIOUS = 13
    SOMETHING_ELSE = 14
    DROP_OFF_PICK_UP = 15


ACTIVITY_LABELS = {
    ActivityType.HOME: "Home",
    ActivityType.WORK: "Work",
    ActivityType.SCHOOL: "School",
    ActivityType.CARE_GIVING: "Care giving",
    ActivityType.BUY_GOODS: "Buy goods",
    ActivityType.BUY_SERVICES: "Buy services",
    ActivityType.BUY_MEALS: "Buy meals",
    ActivityType.GENERAL_ERRANDS: "General errands",
    ActivityType.RECREATIONAL: "Recreational",
    ActivityType.EXERCISE: "Exercise",
    ActivityType.VISIT_FRIENDS: "Visit friends",
    ActivityType.HEALTH_CARE: "Health care",
    ActivityType.RELIGIOUS: "Religious",
    ActivityType.SOMETHING_ELSE: "Something else",
    ActivityType.DROP_OFF_PICK_UP: "Drop off / pick up",
}

LABEL_TO_CODE = {label: int(t) for t, label in ACTIVITY_LABELS.items()}


def is_valid_slot(s: int) -> bool:
    return 1 <= s <= N_SLOTS


def is_valid_type_code(c: int) -> bool:
    return 1 <= c <= N_ACTIVITY_TYPES


@dataclass(frozen=True)
class Activity:
    """One activity episode: type code and inclusive [start, end] slots."""

    kind: int
    start: int
    end: int

    def duration(self) -> int:
        return self.end - self.start + 1


ActivityChain = tuple[Activity, ...]


def chain_from_triples(triples: Iterable[Sequence[int]]) -> ActivityChain:
    return tuple(Activity(int(t), int(s), int(e)) for t, s, e in triples)


def chain_to_triples(chain: ActivityChain) -> list[list[int]]:
    return [[a.kind, a.start, a.end] for a in chain]


@dataclass(frozen=True)
class Violation:
    """A single well-formedness defect found in a chain."""

    index: int
    rule: str
    detail: str


def validate_chain(chain: ActivityChain) -> list[Violation]:
    """Check temporal well-formedness of a chain.

    Rules, in order of the activity index at which they are reported:
    slots inside 1..96, no special type codes, end >= start within an
    activity, and start of each activity >= end of the previous one
    (same-slot transitions are allowed).
    """
    violations: list[Violation] = []
    for i, a in enumerate(chain):
        if not is_valid_type_code(a.kind):
            violations.append(
                Violation(i, "special_code", f"type code {a.kind} outside 1..{N_ACTIVITY_TYPES}")
            )
        if not (is_valid_slot(a.start) and is_valid_slot(a.end)):
            violations.append(
                Violation(i, "slot_range", f"slots [{a.start}, {a.end}] outside 1..{N_SLOTS}")
            )
        if a.end < a.start:
            violations.append(
                Violation(i, "reversed", f"end {a.end} precedes start {a.start}")
            )
        if i > 0 and a.start < chain[i - 1].end:
            violations.append(
                Violation(i, "overlap", f"start {a.start} precedes previous end {chain[i - 1].end}")
            )
    return violations


def duration_slots(activity: Activity) -> int:
    return activity.duration()


DURATION_BIN_WIDTH = 12
N_DURATION_BINS = 8


def duration_bin(duration: int) -> int:
    """Map a duration in slots to one of 8 equal-width bins (1..8)."""
    return math.ceil(duration / DURATION_BIN_WIDTH)


def mode_features(chain: ActivityChain) -> tuple[int, int, int]:
    """Summarize a chain as (mode type, mode duration bin, chain length).

    The first and last activities are excluded when both are Home, so a
    plain commute day is characterized by what happens away from home; if
    the exclusion would empty the chain the full chain is used.  The mode
    type is the most frequent type among the considered activities, ties
    broken by the largest total duration and then by the lowest code.  The
    duration bin is the most frequent bin among that type's occurrences,
    ties to the lowest bin.
    """
    if not chain:
        raise ValueError("mode_features of an empty chain")
    interior = chain
    if (
        len(chain) >= 2
        and chain[0].kind == ActivityType.HOME
        and chain[-1].kind == ActivityType.HOME
    ):
        interior = chain[1:-1]
    if not interior:
        interior = chain

    counts: dict[int, int] = {}
    totals: dict[int, int] = {}
    for a in interior:
        counts[a.kind] = counts.get(a.kind, 0) + 1
        totals[a.kind] = totals.get(a.kind, 0) + a.duration()
    mode_type = min(counts, key=lambda t: (-counts[t], -totals[t], t))

    bin_counts: dict[int, int] = {}
    for a in interior:
        if a.kind == mode_type:
            b = duration_bin(a.duration())
            bin_counts[b] = bin_counts.get(b, 0) + 1
    mode_bin = min(bin_counts, key=lambda b: (-bin_counts[b], b))
    return mode_type, mode_bin, len(chain)


@dataclass(frozen=True)
class AgentProfile:
    """Socio-demographic attribute codes of one person, in schema order."""

    attributes: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(a < 0 for a in self.attributes):
            raise ValueError("attribute codes must be non-negative")


@dataclass(frozen=True)
class Household:
    """Up to five member profiles sharing the household-level attributes."""

    household_id: str
    members: tuple[AgentProfile, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.members) <= MAX_HOUSEHOLD_MEMBERS:
            raise ValueError(
                f"household must have 1..{MAX_HOUSEHOLD_MEMBERS} members, got {len(self.members)}"
            )


@dataclass(frozen=True)
class Trajectory:
    """An activity chain with one zone id per activity."""

    agent_id: str
    chain: ActivityChain
    zones: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.chain) != len(self.zones):
            raise ValueError("one zone per activity required")
