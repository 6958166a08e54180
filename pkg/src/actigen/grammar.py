"""Synthetic population grammars: a controllable diary-generating process.

A grammar draws households, member profiles, and per-member activity
chains.  Chains follow a per-segment first-order Markov process over
activity types with declared start-slot and duration distributions; the
segment (worker / student / nonworker, crossed with weekday vs weekend)
is a deterministic function of the profile, so a model conditioned on the
profile has something real to learn.

Chain validity is guaranteed by construction: start slots are drawn from
the declared distribution truncated to begin at least TRAVEL_FLOOR slots
after the previous activity's end (every trip takes at least half an
hour), and the continue/stop decision is taken before the next type is
drawn, which keeps the realized type transitions unbiased estimates of
the declared matrix.

Anchor activities (work, school) declare clock-time start windows; all
other activities declare geometrically decaying start distributions, so
that after truncation the gap to the previous activity is small and
memoryless -- people head straight to the shop, and straight home.  This
keeps the conditional start/end laws sharp given the history, which is
what lets a sequence model trained on these diaries emit temporally
consistent chains without constraint-level decoding.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Activity, ActivityType, AgentProfile, N_SLOTS, is_valid_type_code
from .errors import ConfigError
from .ingest import EncodedSample, make_sample
from .schema import DatasetSchema, default_schema

_PROB_TOL = 1e-9

# Minimum slots between one activity's end and the next one's start.
TRAVEL_FLOOR = 2


def _check_probs(p: Sequence[float], what: str, length: int | None = None) -> None:
    arr = np.asarray(p, dtype=float)
    if length is not None and arr.shape != (length,):
        raise ConfigError(f"{what}: expected {length} probabilities, got {arr.shape}")
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError(f"{what}: expected a probability vector")
    if (arr < 0).any():
        raise ConfigError(f"{what}: negative probability")
    if abs(arr.sum() - 1.0) > _PROB_TOL:
        raise ConfigError(f"{what}: probabilities sum to {arr.sum():.12f}, not 1")


@dataclass(frozen=True)
class SegmentProcess:
    """Markov diary process for one (base segment, day kind)."""

    types: tuple[int, ...]
    first_probs: tuple[float, ...]
    transition: tuple[tuple[float, ...], ...]
    start_probs: dict[int, tuple[float, ...]]
    duration_probs: dict[int, tuple[float, ...]]
    eos_probs: tuple[float, ...]

    def validate(self, name: str) -> None:
        if not self.types:
            raise ConfigError(f"segment {name}: empty type list")
        for t in self.types:
            if not is_valid_type_code(t):
                raise ConfigError(f"segment {name}: bad activity code {t}")
        if len(set(self.types)) != len(self.types):
            raise ConfigError(f"segment {name}: duplicate activity codes")
        k = len(self.types)
        _check_probs(self.first_probs, f"segment {name} first_probs", k)
        if len(self.transition) != k:
            raise ConfigError(f"segment {name}: transition must have {k} rows")
        for i, row in enumerate(self.transition):
            _check_probs(row, f"segment {name} transition row {i}", k)
        for t in self.types:
            if t not in self.start_probs or t not in self.duration_probs:
                raise ConfigError(f"segment {name}: missing slot distributions for type {t}")
            _check_probs(self.start_probs[t], f"segment {name} start[{t}]", N_SLOTS)
            _check_probs(self.duration_probs[t], f"segment {name} duration[{t}]", N_SLOTS)
        if not self.eos_probs:
            raise ConfigError(f"segment {name}: empty eos_probs")
        for p in self.eos_probs:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"segment {name}: eos probability {p} outside [0, 1]")


@dataclass(frozen=True)
class SegmentClause:
    """Ordered classification clause: profile attr in codes -> segment."""

    segment: str
    attr: str
    codes: tuple[int, ...]


@dataclass(frozen=True)
class SyntheticGrammar:
    """Full generative specification for a synthetic survey population."""

    schema: DatasetSchema
    segments: dict[str, SegmentProcess]
    base_segment_probs: dict[str, float]
    segment_rule: tuple[SegmentClause, ...]
    default_segment: str
    segment_assignments: dict[str, dict[str, int | tuple[int, ...]]]
    attr_marginals: dict[str, tuple[float, ...]]
    household_size_probs: tuple[float, ...]
    weekday_prob: float
    max_len: int = 12

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        names = set(self.schema.names)
        _check_probs(list(self.base_segment_probs.values()), "base_segment_probs")
        bases = set(self.base_segment_probs)
        if self.default_segment not in bases:
            raise ConfigError(f"default segment {self.default_segment!r} not declared")
        for clause in self.segment_rule:
            if clause.segment not in bases:
                raise ConfigError(f"segment rule names unknown segment {clause.segment!r}")
            if clause.attr not in names:
                raise ConfigError(f"segment rule uses unknown attribute {clause.attr!r}")
        for base in bases:
            for day in ("wd", "we"):
                key = f"{base}_{day}"
                if key not in self.segments:
                    raise ConfigError(f"missing segment process {key!r}")
        for key, proc in self.segments.items():
            proc.validate(key)
        for base, assigns in self.segment_assignments.items():
            if base not in bases:
                raise ConfigError(f"assignments for unknown segment {base!r}")
            for attr in assigns:
                if attr not in names:
                    raise ConfigError(f"assignment for unknown attribute {attr!r}")
        for spec in self.schema.attributes:
            if spec.name not in self.attr_marginals:
                raise ConfigError(f"missing marginal for attribute {spec.name!r}")
            _check_probs(self.attr_marginals[spec.name],
                         f"marginal {spec.name}", spec.cardinality)
        _check_probs(self.household_size_probs, "household_size_probs", 5)
        if not 0.0 <= self.weekday_prob <= 1.0:
            raise ConfigError("weekday_prob outside [0, 1]")
        if self.max_len < 1:
            raise ConfigError("max_len must be >= 1")

    def classify(self, attributes: Sequence[int], weekday: int) -> str:
        """Segment key for a profile, e.g. 'worker_wd'."""
        base = self.default_segment
        for clause in self.segment_rule:
            if attributes[self.schema.index_of(clause.attr)] in clause.codes:
                base = clause.segment
                break
        return f"{base}_{'wd' if weekday else 'we'}"

    # ---- serialization ----

    def to_json(self) -> str:
        payload = {
            "version": 1,
            "schema": json.loads(self.schema.to_json()),
            "max_len": self.max_len,
            "weekday_prob": self.weekday_prob,
            "household_size_probs": list(self.household_size_probs),
            "base_segments": self.base_segment_probs,
            "segment_rule": {
                "clauses": [
                    {"segment": c.segment, "attr": c.attr, "codes": list(c.codes)}
                    for c in self.segment_rule
                ],
                "default": self.default_segment,
            },
            "segment_assignments": {
                base: {a: (list(v) if isinstance(v, tuple) else v) for a, v in assigns.items()}
                for base, assigns in self.segment_assignments.items()
            },
            "attr_marginals": {k: list(v) for k, v in self.attr_marginals.items()},
            "segments": {
                key: {
                    "types": list(p.types),
                    "first": list(p.first_probs),
                    "transition": [list(r) for r in p.transition],
                    "start": {str(t): list(v) for t, v in p.start_probs.items()},
                    "duration": {str(t): list(v) for t, v in p.duration_probs.items()},
                    "eos": list(p.eos_probs),
                }
                for key, p in self.segments.items()
            },
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticGrammar":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad grammar JSON: {exc}") from exc
        try:
            schema = DatasetSchema.from_json(json.dumps(payload["schema"]))
            segments = {}
            for key, p in payload["segments"].items():
                segments[key] = SegmentProcess(
                    types=tuple(int(t) for t in p["types"]),
                    first_probs=tuple(p["first"]),
                    transition=tuple(tuple(r) for r in p["transition"]),
                    start_probs={int(t): tuple(v) for t, v in p["start"].items()},
                    duration_probs={int(t): tuple(v) for t, v in p["duration"].items()},
                    eos_probs=tuple(p["eos"]),
                )
            rule = payload["segment_rule"]
            return cls(
                schema=schema,
                segments=segments,
                base_segment_probs={k: float(v) for k, v in payload["base_segments"].items()},
                segment_rule=tuple(
                    SegmentClause(c["segment"], c["attr"], tuple(int(x) for x in c["codes"]))
                    for c in rule["clauses"]
                ),
                default_segment=rule["default"],
                segment_assignments={
                    base: {a: (tuple(v) if isinstance(v, list) else int(v)) for a, v in assigns.items()}
                    for base, assigns in payload["segment_assignments"].items()
                },
                attr_marginals={k: tuple(v) for k, v in payload["attr_marginals"].items()},
                household_size_probs=tuple(payload["household_size_probs"]),
                weekday_prob=float(payload["weekday_prob"]),
                max_len=int(payload["max_len"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad grammar JSON: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticGrammar":
        return cls.from_json(Path(path).read_text())


# ---- sampling ----


class _CompiledProcess:
    """Cumulative-distribution tables for fast inverse-CDF sampling."""

    def __init__(self, proc: SegmentProcess):
        self.types = np.asarray(proc.types, dtype=np.int64)
        self.row = {int(t): i for i, t in enumerate(proc.types)}
        self.first_cum = np.cumsum(proc.first_probs)
        self.trans_cum = np.cumsum(np.asarray(proc.transition, dtype=float), axis=1)
        self.start_cum = {t: np.cumsum(proc.start_probs[t]) for t in proc.types}
        self.dur_cum = {t: np.cumsum(proc.duration_probs[t]) for t in proc.types}
        self.eos = np.asarray(proc.eos_probs, dtype=float)

    def eos_prob(self, n_done: int) -> float:
        return float(self.eos[min(n_done - 1, len(self.eos) - 1)])


def _draw(cum: np.ndarray, rng: np.random.Generator) -> int:
    return int(np.searchsorted(cum, rng.random(), side="right"))


def _draw_start(cum: np.ndarray, lo_slot: int, rng: np.random.Generator) -> int:
    """Sample a slot >= lo_slot from the distribution with cumulative cum."""
    base = cum[lo_slot - 2] if lo_slot >= 2 else 0.0
    tail = cum[-1] - base
    if tail <= 1e-12:
        return lo_slot
    u = base + rng.random() * tail
    slot = int(np.searchsorted(cum, u, side="right")) + 1
    return min(slot, N_SLOTS)


def _sample_chain(comp: _CompiledProcess, max_len: int, rng: np.random.Generator) -> tuple[Activity, ...]:
    kind = int(comp.types[_draw(comp.first_cum, rng)])
    start = 1
    dur = _draw(comp.dur_cum[kind], rng) + 1
    end = min(start + dur - 1, N_SLOTS)
    chain = [Activity(kind, start, end)]
    while len(chain) < max_len and end < N_SLOTS:
        if rng.random() < comp.eos_prob(len(chain)):
            break
        row = comp.trans_cum[comp.row[kind]]
        kind = int(comp.types[int(np.searchsorted(row, rng.random(), side="right"))])
        start = _draw_start(comp.start_cum[kind], min(end + TRAVEL_FLOOR, N_SLOTS), rng)
        dur = _draw(comp.dur_cum[kind], rng) + 1
        end = min(start + dur - 1, N_SLOTS)
        chain.append(Activity(kind, start, end))
    return tuple(chain)


def synth_population(
    grammar: SyntheticGrammar,
    n: int,
    seed: int = 0,
    id_prefix: str = "hh",
) -> list[EncodedSample]:
    """Draw whole households until n samples (diary persons) exist.

    Output is deterministic in (grammar, n, seed) byte for byte.  The last
    household may be emitted partially to hit n exactly.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    schema = grammar.schema
    rng = np.random.default_rng(seed)
    compiled = {key: _CompiledProcess(p) for key, p in grammar.segments.items()}
    base_names = sorted(grammar.base_segment_probs)
    base_cum = np.cumsum([grammar.base_segment_probs[b] for b in base_names])
    size_cum = np.cumsum(grammar.household_size_probs)
    marg_cum = {name: np.cumsum(grammar.attr_marginals[name]) for name in schema.names}
    hh_attr_names = schema.names[13:]
    size_attr = "household_size" if "household_size" in schema.names else None

    samples: list[EncodedSample] = []
    h = 0
    while len(samples) < n:
        hid = f"{id_prefix}{h:06d}"
        h += 1
        size = _draw(size_cum, rng) + 1
        weekday = 1 if rng.random() < grammar.weekday_prob else 0
        hh_codes = {name: _draw(marg_cum[name], rng) for name in hh_attr_names}
        if size_attr is not None:
            hh_codes[size_attr] = size - 1

        profiles = []
        segments = []
        for _ in range(size):
            codes = {}
            for name in schema.names[:13]:
                codes[name] = _draw(marg_cum[name], rng)
            codes.update(hh_codes)
            base = base_names[_draw(base_cum, rng)]
            for attr, val in sorted(grammar.segment_assignments.get(base, {}).items()):
                if isinstance(val, tuple):
                    codes[attr] = val[int(rng.integers(len(val)))]
                else:
                    codes[attr] = val
            attrs = tuple(codes[name] for name in schema.names)
            profiles.append(attrs)
            segments.append(grammar.classify(attrs, weekday))

        members = [AgentProfile(p) for p in profiles]
        for ti in range(size):
            chain = _sample_chain(compiled[segments[ti]], grammar.max_len, rng)
            samples.append(make_sample(hid, members, ti, chain, weekday, schema))
            if len(samples) >= n:
                break
    return samples


# ---- reference grammars ----


def _window(lo: int, hi: int, peak: int | None = None, size: int = N_SLOTS) -> tuple[float, ...]:
    """Triangular distribution on slots lo..hi (inclusive), linear ramp to peak."""
    w = np.zeros(size)
    if peak is None:
        peak = (lo + hi) // 2
    for s in range(lo, hi + 1):
        left = (s - lo + 1) / (peak - lo + 1)
        right = (hi - s + 1) / (hi - peak + 1)
        w[s - 1] = min(left, right)
    total = w.sum()
    if total <= 0:
        raise ConfigError("empty slot window")
    return tuple(w / total)


def _mix(*parts: tuple[float, tuple[float, ...]]) -> tuple[float, ...]:
    out = np.zeros(N_SLOTS)
    for weight, dist in parts:
        out += weight * np.asarray(dist)
    return tuple(out / out.sum())


def _point(slot: int) -> tuple[float, ...]:
    w = np.zeros(N_SLOTS)
    w[slot - 1] = 1.0
    return tuple(w)


def _soonest(rate: float) -> tuple[float, ...]:
    """Geometric decay over all slots: after truncation at the previous
    activity's end, the residual gap is memoryless with mean rate/(1-rate),
    i.e. the agent heads to the next place near-immediately."""
    w = rate ** np.arange(N_SLOTS, dtype=float)
    return tuple(w / w.sum())


def _decay(card: int, rate: float = 0.65, dummy_share: float = 0.03) -> tuple[float, ...]:
    real = np.array([rate**i for i in range(card - 1)])
    real = real / real.sum() * (1.0 - dummy_share)
    return tuple(real) + (dummy_share,)


T = ActivityType


def _matrix(types: Sequence[int], rows: dict[int, dict[int, float]]) -> tuple[tuple[float, ...], ...]:
    out = []
    for t in types:
        row = np.zeros(len(types))
        for u, p in rows[t].items():
            row[types.index(u)] = p
        total = row.sum()
        if not np.isclose(total, 1.0, atol=1e-9):
            row = row / total
        out.append(tuple(row))
    return tuple(out)


def _first(types: Sequence[int], probs: dict[int, float]) -> tuple[float, ...]:
    row = np.zeros(len(types))
    for t, p in probs.items():
        row[types.index(t)] = p
    return tuple(row / row.sum())


def make_reference_grammar() -> SyntheticGrammar:
    """Grammar A: the reference synthetic region."""
    schema = default_schema()

    home_start = _soonest(0.30)
    home_dur = _mix((0.5, _window(4, 20, 9)), (0.5, _window(16, 56, 30)))

    worker_wd_types = [T.HOME, T.WORK, T.BUY_GOODS, T.BUY_MEALS, T.RECREATIONAL,
                       T.EXERCISE, T.DROP_OFF_PICK_UP]
    worker_wd = SegmentProcess(
        types=tuple(int(t) for t in worker_wd_types),
        first_probs=_first(worker_wd_types, {T.HOME: 1.0}),
        transition=_matrix(worker_wd_types, {
            T.HOME: {T.WORK: 0.66, T.BUY_GOODS: 0.06, T.BUY_MEALS: 0.05,
                     T.RECREATIONAL: 0.07, T.EXERCISE: 0.08, T.DROP_OFF_PICK_UP: 0.08},
            T.WORK: {T.HOME: 0.52, T.BUY_MEALS: 0.20, T.BUY_GOODS: 0.10,
                     T.RECREATIONAL: 0.09, T.EXERCISE: 0.05, T.DROP_OFF_PICK_UP: 0.04},
            T.BUY_GOODS: {T.HOME: 0.60, T.WORK: 0.15, T.BUY_MEALS: 0.10, T.RECREATIONAL: 0.10,
                          T.EXERCISE: 0.05},
            T.BUY_MEALS: {T.HOME: 0.45, T.WORK: 0.35, T.RECREATIONAL: 0.12, T.BUY_GOODS: 0.08},
            T.RECREATIONAL: {T.HOME: 0.72, T.BUY_MEALS: 0.10, T.BUY_GOODS: 0.06,
                             T.EXERCISE: 0.05, T.WORK: 0.07},
            T.EXERCISE: {T.HOME: 0.78, T.BUY_MEALS: 0.08, T.WORK: 0.09, T.RECREATIONAL: 0.05},
            T.DROP_OFF_PICK_UP: {T.WORK: 0.55, T.HOME: 0.30, T.BUY_GOODS: 0.10, T.BUY_MEALS: 0.05},
        }),
        start_probs={
            int(T.HOME): home_start,
            int(T.WORK): _window(28, 44, 34),
            int(T.BUY_GOODS): _soonest(0.30),
            int(T.BUY_MEALS): _soonest(0.30),
            int(T.RECREATIONAL): _soonest(0.30),
            int(T.EXERCISE): _soonest(0.30),
            int(T.DROP_OFF_PICK_UP): _soonest(0.15),
        },
        duration_probs={
            int(T.HOME): home_dur,
            int(T.WORK): _window(22, 42, 33),
            int(T.BUY_GOODS): _window(4, 16, 8),
            int(T.BUY_MEALS): _window(4, 12, 6),
            int(T.RECREATIONAL): _window(5, 18, 9),
            int(T.EXERCISE): _window(4, 12, 6),
            int(T.DROP_OFF_PICK_UP): _window(3, 7, 4),
        },
        eos_probs=(0.0, 0.02, 0.30, 0.42, 0.55, 0.70),
    )

    worker_we_types = [T.HOME, T.BUY_GOODS, T.BUY_SERVICES, T.BUY_MEALS, T.RECREATIONAL,
                       T.EXERCISE, T.VISIT_FRIENDS, T.RELIGIOUS]
    worker_we = SegmentProcess(
        types=tuple(int(t) for t in worker_we_types),
        first_probs=_first(worker_we_types, {T.HOME: 1.0}),
        transition=_matrix(worker_we_types, {
            T.HOME: {T.BUY_GOODS: 0.22, T.BUY_SERVICES: 0.06, T.BUY_MEALS: 0.10,
                     T.RECREATIONAL: 0.26, T.EXERCISE: 0.14, T.VISIT_FRIENDS: 0.14,
                     T.RELIGIOUS: 0.08},
            T.BUY_GOODS: {T.HOME: 0.58, T.BUY_MEALS: 0.14, T.RECREATIONAL: 0.12,
                          T.BUY_SERVICES: 0.08, T.VISIT_FRIENDS: 0.08},
            T.BUY_SERVICES: {T.HOME: 0.60, T.BUY_GOODS: 0.20, T.BUY_MEALS: 0.12,
                             T.RECREATIONAL: 0.08},
            T.BUY_MEALS: {T.HOME: 0.55, T.RECREATIONAL: 0.20, T.VISIT_FRIENDS: 0.15,
                          T.BUY_GOODS: 0.10},
            T.RECREATIONAL: {T.HOME: 0.62, T.BUY_MEALS: 0.16, T.VISIT_FRIENDS: 0.12,
                             T.BUY_GOODS: 0.10},
            T.EXERCISE: {T.HOME: 0.70, T.BUY_MEALS: 0.14, T.RECREATIONAL: 0.16},
            T.VISIT_FRIENDS: {T.HOME: 0.68, T.BUY_MEALS: 0.18, T.RECREATIONAL: 0.14},
            T.RELIGIOUS: {T.HOME: 0.62, T.BUY_MEALS: 0.22, T.VISIT_FRIENDS: 0.16},
        }),
        start_probs={
            int(T.HOME): home_start,
            int(T.BUY_GOODS): _soonest(0.30),
            int(T.BUY_SERVICES): _soonest(0.30),
            int(T.BUY_MEALS): _soonest(0.30),
            int(T.RECREATIONAL): _soonest(0.30),
            int(T.EXERCISE): _soonest(0.30),
            int(T.VISIT_FRIENDS): _soonest(0.30),
            int(T.RELIGIOUS): _soonest(0.30),
        },
        duration_probs={
            int(T.HOME): home_dur,
            int(T.BUY_GOODS): _window(4, 16, 8),
            int(T.BUY_SERVICES): _window(4, 12, 6),
            int(T.BUY_MEALS): _window(4, 12, 6),
            int(T.RECREATIONAL): _window(6, 24, 12),
            int(T.EXERCISE): _window(4, 12, 6),
            int(T.VISIT_FRIENDS): _window(6, 20, 10),
            int(T.RELIGIOUS): _window(6, 14, 8),
        },
        eos_probs=(0.0, 0.18, 0.34, 0.48, 0.62, 0.75),
    )

    student_wd_types = [T.HOME, T.SCHOOL, T.RECREATIONAL, T.EXERCISE, T.BUY_MEALS,
                        T.VISIT_FRIENDS]
    student_wd = SegmentProcess(
        types=tuple(int(t) for t in student_wd_types),
        first_probs=_first(student_wd_types, {T.HOME: 1.0}),
        transition=_matrix(student_wd_types, {
            T.HOME: {T.SCHOOL: 0.78, T.RECREATIONAL: 0.08, T.EXERCISE: 0.07,
                     T.VISIT_FRIENDS: 0.07},
            T.SCHOOL: {T.HOME: 0.58, T.RECREATIONAL: 0.14, T.EXERCISE: 0.10,
                       T.BUY_MEALS: 0.10, T.VISIT_FRIENDS: 0.08},
            T.RECREATIONAL: {T.HOME: 0.74, T.BUY_MEALS: 0.12, T.VISIT_FRIENDS: 0.14},
            T.EXERCISE: {T.HOME: 0.80, T.BUY_MEALS: 0.12, T.RECREATIONAL: 0.08},
            T.BUY_MEALS: {T.HOME: 0.70, T.RECREATIONAL: 0.16, T.VISIT_FRIENDS: 0.14},
            T.VISIT_FRIENDS: {T.HOME: 0.80, T.BUY_MEALS: 0.12, T.RECREATIONAL: 0.08},
        }),
        start_probs={
            int(T.HOME): home_start,
            int(T.SCHOOL): _window(29, 38, 33),
            int(T.RECREATIONAL): _soonest(0.30),
            int(T.EXERCISE): _soonest(0.30),
            int(T.BUY_MEALS): _soonest(0.30),
            int(T.VISIT_FRIENDS): _soonest(0.30),
        },
        duration_probs={
            int(T.HOME): home_dur,
            int(T.SCHOOL): _window(24, 32, 28),
            int(T.RECREATIONAL): _window(4, 14, 7),
            int(T.EXERCISE): _window(4, 10, 6),
            int(T.BUY_MEALS): _window(4, 9, 5),
            int(T.VISIT_FRIENDS): _window(5, 16, 9),
        },
        eos_probs=(0.0, 0.04, 0.38, 0.52, 0.66, 0.78),
    )

    student_we_types = [T.HOME, T.RECREATIONAL, T.EXERCISE, T.VISIT_FRIENDS, T.BUY_MEALS,
                        T.BUY_GOODS]
    student_we = SegmentProcess(
        types=tuple(int(t) for t in student_we_types),
        first_probs=_first(student_we_types, {T.HOME: 1.0}),
        transition=_matrix(student_we_types, {
            T.HOME: {T.RECREATIONAL: 0.34, T.EXERCISE: 0.16, T.VISIT_FRIENDS: 0.26,
                     T.BUY_MEALS: 0.12, T.BUY_GOODS: 0.12},
            T.RECREATIONAL: {T.HOME: 0.60, T.BUY_MEALS: 0.18, T.VISIT_FRIENDS: 0.22},
            T.EXERCISE: {T.HOME: 0.72, T.BUY_MEALS: 0.16, T.RECREATIONAL: 0.12},
            T.VISIT_FRIENDS: {T.HOME: 0.64, T.BUY_MEALS: 0.20, T.RECREATIONAL: 0.16},
            T.BUY_MEALS: {T.HOME: 0.66, T.RECREATIONAL: 0.18, T.VISIT_FRIENDS: 0.16},
            T.BUY_GOODS: {T.HOME: 0.70, T.BUY_MEALS: 0.18, T.RECREATIONAL: 0.12},
        }),
        start_probs={
            int(T.HOME): home_start,
            int(T.RECREATIONAL): _soonest(0.30),
            int(T.EXERCISE): _soonest(0.30),
            int(T.VISIT_FRIENDS): _soonest(0.30),
            int(T.BUY_MEALS): _soonest(0.30),
            int(T.BUY_GOODS): _soonest(0.30),
        },
        duration_probs={
            int(T.HOME): home_dur,
            int(T.RECREATIONAL): _window(6, 22, 11),
            int(T.EXERCISE): _window(4, 12, 6),
            int(T.VISIT_FRIENDS): _window(6, 22, 11),
            int(T.BUY_MEALS): _window(4, 10, 6),
            int(T.BUY_GOODS): _window(4, 12, 6),
        },
        eos_probs=(0.0, 0.20, 0.38, 0.52, 0.66, 0.78),
    )

    nonworker_wd_types = [T.HOME, T.CARE_GIVING, T.BUY_GOODS, T.BUY_SERVICES,
                          T.GENERAL_ERRANDS, T.RECREATIONAL, T.VISIT_FRIENDS, T.HEALTH_CARE]
    nonworker_wd = SegmentProcess(
        types=tuple(int(t) for t in nonworker_wd_types),
        first_probs=_first(nonworker_wd_types, {T.HOME: 1.0}),
        transition=_matrix(nonworker_wd_types, {
            T.HOME: {T.BUY_GOODS: 0.24, T.BUY_SERVICES: 0.08, T.GENERAL_ERRANDS: 0.16,
                     T.RECREATIONAL: 0.18, T.VISIT_FRIENDS: 0.12, T.HEALTH_CARE: 0.10,
                     T.CARE_GIVING: 0.12},
            T.CARE_GIVING: {T.HOME: 0.66, T.BUY_GOODS: 0.18, T.GENERAL_ERRANDS: 0.16},
            T.BUY_GOODS: {T.HOME: 0.58, T.GENERAL_ERRANDS: 0.14, T.BUY_SERVICES: 0.10,
                          T.RECREATIONAL: 0.10, T.VISIT_FRIENDS: 0.08},
            T.BUY_SERVICES: {T.HOME: 0.62, T.BUY_GOODS: 0.18, T.GENERAL_ERRANDS: 0.20},
            T.GENERAL_ERRANDS: {T.HOME: 0.60, T.BUY_GOODS: 0.18, T.BUY_SERVICES: 0.10,
                                T.RECREATIONAL: 0.12},
            T.RECREATIONAL: {T.HOME: 0.66, T.VISIT_FRIENDS: 0.14, T.BUY_GOODS: 0.10,
                             T.GENERAL_ERRANDS: 0.10},
            T.VISIT_FRIENDS: {T.HOME: 0.72, T.RECREATIONAL: 0.14, T.BUY_GOODS: 0.14},
            T.HEALTH_CARE: {T.HOME: 0.64, T.BUY_GOODS: 0.20, T.GENERAL_ERRANDS: 0.16},
        }),
        start_probs={
            int(T.HOME): home_start,
            int(T.CARE_GIVING): _soonest(0.25),
            int(T.BUY_GOODS): _soonest(0.30),
            int(T.BUY_SERVICES): _soonest(0.30),
            int(T.GENERAL_ERRANDS): _soonest(0.30),
            int(T.RECREATIONAL): _soonest(0.30),
            int(T.VISIT_FRIENDS): _soonest(0.30),
            int(T.HEALTH_CARE): _soonest(0.25),
        },
        duration_probs={
            int(T.HOME): home_dur,
            int(T.CARE_GIVING): _window(4, 20, 9),
            int(T.BUY_GOODS): _window(4, 14, 7),
            int(T.BUY_SERVICES): _window(4, 12, 6),
            int(T.GENERAL_ERRANDS): _window(4, 12, 6),
            int(T.RECREATIONAL): _window(5, 20, 10),
            int(T.VISIT_FRIENDS): _window(5, 18, 9),
            int(T.HEALTH_CARE): _window(4, 12, 6),
        },
        eos_probs=(0.0, 0.16, 0.30, 0.44, 0.58, 0.72),
    )

    nonworker_we_types = [T.HOME, T.RECREATIONAL, T.VISIT_FRIENDS, T.RELIGIOUS,
                          T.BUY_GOODS, T.BUY_MEALS]
    nonworker_we = SegmentProcess(
        types=tuple(int(t) for t in nonworker_we_types),
        first_probs=_first(nonworker_we_types, {T.HOME: 1.0}),
        transition=_matrix(nonworker_we_types, {
            T.HOME: {T.RECREATIONAL: 0.24, T.VISIT_FRIENDS: 0.24, T.RELIGIOUS: 0.18,
                     T.BUY_GOODS: 0.18, T.BUY_MEALS: 0.16},
            T.RECREATIONAL: {T.HOME: 0.64, T.BUY_MEALS: 0.18, T.VISIT_FRIENDS: 0.18},
            T.VISIT_FRIENDS: {T.HOME: 0.66, T.BUY_MEALS: 0.20, T.RECREATIONAL: 0.14},
            T.RELIGIOUS: {T.HOME: 0.58, T.BUY_MEALS: 0.24, T.VISIT_FRIENDS: 0.18},
            T.BUY_GOODS: {T.HOME: 0.68, T.BUY_MEALS: 0.18, T.RECREATIONAL: 0.14},
            T.BUY_MEALS: {T.HOME: 0.70, T.RECREATIONAL: 0.14, T.VISIT_FRIENDS: 0.16},
        }),
        start_probs={
            int(T.HOME): home_start,
            int(T.RECREATIONAL): _soonest(0.30),
            int(T.VISIT_FRIENDS): _soonest(0.30),
            int(T.RELIGIOUS): _soonest(0.30),
            int(T.BUY_GOODS): _soonest(0.30),
            int(T.BUY_MEALS): _soonest(0.30),
        },
        duration_probs={
            int(T.HOME): home_dur,
            int(T.RECREATIONAL): _window(5, 20, 10),
            int(T.VISIT_FRIENDS): _window(6, 20, 10),
            int(T.RELIGIOUS): _window(6, 14, 8),
            int(T.BUY_GOODS): _window(4, 12, 6),
            int(T.BUY_MEALS): _window(4, 10, 6),
        },
        eos_probs=(0.0, 0.22, 0.36, 0.50, 0.64, 0.76),
    )

    marginals: dict[str, tuple[float, ...]] = {}
    for spec in schema.attributes:
        marginals[spec.name] = _decay(spec.cardinality)
    marginals["gender"] = (0.49, 0.48, 0.015, 0.015)
    marginals["age_group"] = (0.10, 0.13, 0.17, 0.18, 0.16, 0.13, 0.10, 0.03)
    marginals["household_income"] = (0.08, 0.12, 0.16, 0.18, 0.16, 0.14, 0.10, 0.06)
    marginals["household_vehicles"] = (0.09, 0.34, 0.33, 0.15, 0.06, 0.03)

    return SyntheticGrammar(
        schema=schema,
        segments={
            "worker_wd": worker_wd,
            "worker_we": worker_we,
            "student_wd": student_wd,
            "student_we": student_we,
            "nonworker_wd": nonworker_wd,
            "nonworker_we": nonworker_we,
        },
        base_segment_probs={"worker": 0.55, "student": 0.20, "nonworker": 0.25},
        segment_rule=(
            SegmentClause("worker", "employment_status", (0,)),
            SegmentClause("student", "school_grade", (1, 2, 3, 4, 5, 6)),
        ),
        default_segment="nonworker",
        segment_assignments={
            "worker": {"employment_status": 0, "school_grade": 0,
                       "workdays_per_week": (4, 5, 6), "age_group": (1, 2, 3, 4, 5)},
            "student": {"employment_status": 2, "school_grade": (1, 2, 3, 4, 5, 6),
                        "age_group": (0, 1, 2)},
            "nonworker": {"employment_status": (1, 2), "school_grade": 0,
                          "age_group": (4, 5, 6)},
        },
        attr_marginals=marginals,
        household_size_probs=(0.28, 0.34, 0.16, 0.14, 0.08),
        weekday_prob=5.0 / 7.0,
        max_len=10,
    )


def make_shifted_grammar() -> SyntheticGrammar:
    """Grammar B: a second region with later days, longer leisure, and an
    extra 'Something else' category; used for transfer experiments."""
    ref = make_reference_grammar()
    segments = dict(ref.segments)

    def shift(dist: tuple[float, ...], k: int) -> tuple[float, ...]:
        arr = np.asarray(dist)
        out = np.zeros_like(arr)
        if k >= 0:
            out[k:] = arr[: N_SLOTS - k]
            out[-1] += arr[N_SLOTS - k:].sum()
        else:
            out[:k] = arr[-k:]
            out[0] += arr[:-k].sum()
        return tuple(out / out.sum())

    for key, proc in ref.segments.items():
        starts = {t: shift(v, 5) for t, v in proc.start_probs.items()}
        durs = dict(proc.duration_probs)
        for t in durs:
            if t in (int(T.RECREATIONAL), int(T.VISIT_FRIENDS)):
                durs[t] = shift(durs[t], 4)
        eos = tuple(max(0.0, p - 0.10) for p in proc.eos_probs)
        segments[key] = SegmentProcess(
            types=proc.types,
            first_probs=proc.first_probs,
            transition=proc.transition,
            start_probs=starts,
            duration_probs=durs,
            eos_probs=eos,
        )

    # weekend processes pick up a 'Something else' category
    for key in ("worker_we", "nonworker_we"):
        proc = segments[key]
        types = proc.types + (int(T.SOMETHING_ELSE),)
        k = len(types)
        first = tuple(proc.first_probs) + (0.0,)
        new_rows = []
        for row in proc.transition:
            r = np.array(row + (0.0,)) * (1.0 - 0.07)
            r[-1] += 0.07  # reroute a share of every move to the new type
            new_rows.append(tuple(r / r.sum()))
        last_row = np.zeros(k)
        last_row[0] = 0.72  # home
        last_row[-2] = 0.14
        last_row[1] = 0.14
        new_rows.append(tuple(last_row / last_row.sum()))
        starts = dict(proc.start_probs)
        starts[int(T.SOMETHING_ELSE)] = _soonest(0.30)
        durs = dict(proc.duration_probs)
        durs[int(T.SOMETHING_ELSE)] = _window(4, 16, 8)
        segments[key] = SegmentProcess(
            types=types,
            first_probs=first,
            transition=tuple(new_rows),
            start_probs=starts,
            duration_probs=durs,
            eos_probs=proc.eos_probs,
        )

    return SyntheticGrammar(
        schema=ref.schema,
        segments=segments,
        base_segment_probs={"worker": 0.48, "student": 0.18, "nonworker": 0.34},
        segment_rule=ref.segment_rule,
        default_segment=ref.default_segment,
        segment_assignments=ref.segment_assignments,
        attr_marginals=ref.attr_marginals,
        household_size_probs=(0.22, 0.30, 0.20, 0.16, 0.12),
        weekday_prob=5.0 / 7.0,
        max_len=10,
    )
