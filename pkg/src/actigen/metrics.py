"""Distribution and structure metrics for comparing chain populations.

All divergences are Jensen-Shannon divergences with base-2 logarithms, so
values live in [0, 1].  Structural comparisons run over a 17x17 transition
matrix whose states are the 15 activity types plus virtual START and END
nodes; rows with no observations stay all-zero and are flagged in a mask.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import ActivityChain, N_ACTIVITY_TYPES

N_TRANSITION_STATES = N_ACTIVITY_TYPES + 2  # types plus START and END
START_STATE = 0
END_STATE = N_TRANSITION_STATES - 1


@dataclass(frozen=True)
class Histogram:
    """Normalized masses over an integer support."""

    label: str
    support: tuple[int, ...]
    masses: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.masses):
            raise ValueError("support and masses must align")
        if any(m < 0 for m in self.masses):
            raise ValueError("negative mass")

    @classmethod
    def from_counts(cls, label: str, counts: dict[int, float] | None,
                    support: Sequence[int] | None = None) -> "Histogram":
        counts = counts or {}
        if support is None:
            support = sorted(counts)
        total = float(sum(counts.get(s, 0.0) for s in support))
        masses = tuple((counts.get(s, 0.0) / total) if total > 0 else 0.0 for s in support)
        return cls(label, tuple(int(s) for s in support), masses)

    @classmethod
    def from_values(cls, label: str, values: Iterable[int],
                    support: Sequence[int] | None = None) -> "Histogram":
        counts: dict[int, float] = {}
        for v in values:
            counts[int(v)] = counts.get(int(v), 0.0) + 1.0
        return cls.from_counts(label, counts, support)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.support, self.masses))


def write_histogram_csv(hist: Histogram, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("bin,mass\n")
        for s, m in zip(hist.support, hist.masses):
            fh.write(f"{s},{m!r}\n")


def _aligned(p: Histogram | Sequence[float], q: Histogram | Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(p, Histogram) and isinstance(q, Histogram):
        support = sorted(set(p.support) | set(q.support))
        pd, qd = p.as_dict(), q.as_dict()
        return (np.array([pd.get(s, 0.0) for s in support]),
                np.array([qd.get(s, 0.0) for s in support]))
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    if pa.shape != qa.shape:
        raise ValueError("histograms must share a support to compare")
    return pa, qa


def jsd(p: Histogram | Sequence[float], q: Histogram | Sequence[float]) -> float:
    """Jensen-Shannon divergence, log base 2.

    Histogram inputs are aligned on the union of supports; array inputs
    must already share one.  Zero-mass entries contribute zero.  Identical
    inputs give exactly 0.0 and disjointly supported ones exactly 1.0.
    """
    pa, qa = _aligned(p, q)
    if pa.sum() > 0:
        pa = pa / pa.sum()
    if qa.sum() > 0:
        qa = qa / qa.sum()
    if np.array_equal(pa, qa):
        return 0.0
    both = (pa > 0) & (qa > 0)
    if not both.any():
        return 1.0
    m = 0.5 * (pa + qa)
    out = 0.0
    pm = pa > 0
    qm = qa > 0
    out += 0.5 * float(np.sum(pa[pm] * np.log2(pa[pm] / m[pm])))
    out += 0.5 * float(np.sum(qa[qm] * np.log2(qa[qm] / m[qm])))
    return max(out, 0.0)


_HIST_KEYS = ("length", "duration", "start", "end", "type")


def chain_histograms(chains: Sequence[ActivityChain]) -> dict[str, Histogram]:
    """Population histograms: chain length, activity duration, start and
    end slots, and activity type."""
    lengths: list[int] = []
    durations: list[int] = []
    starts: list[int] = []
    ends: list[int] = []
    types: list[int] = []
    for chain in chains:
        lengths.append(len(chain))
        for a in chain:
            durations.append(a.duration())
            starts.append(a.start)
            ends.append(a.end)
            types.append(a.kind)
    return {
        "length": Histogram.from_values("length", lengths),
        "duration": Histogram.from_values("duration", durations),
        "start": Histogram.from_values("start", starts),
        "end": Histogram.from_values("end", ends),
        "type": Histogram.from_values("type", types),
    }


@dataclass(frozen=True)
class TransitionMatrix:
    """Counts and row-normalized probabilities over START/types/END."""

    counts: np.ndarray
    probs: np.ndarray
    row_mask: np.ndarray  # True where the row has observations

    @property
    def n(self) -> int:
        return self.counts.shape[0]


def transition_matrix(chains: Sequence[ActivityChain]) -> TransitionMatrix:
    counts = np.zeros((N_TRANSITION_STATES, N_TRANSITION_STATES), dtype=np.int64)
    for chain in chains:
        if not chain:
            continue
        counts[START_STATE, chain[0].kind] += 1
        for a, b in zip(chain, chain[1:]):
            counts[a.kind, b.kind] += 1
        counts[chain[-1].kind, END_STATE] += 1
    sums = counts.sum(axis=1)
    row_mask = sums > 0
    probs = np.zeros_like(counts, dtype=float)
    probs[row_mask] = counts[row_mask] / sums[row_mask, None]
    return TransitionMatrix(counts, probs, row_mask)


def completeness(gen: TransitionMatrix, truth: TransitionMatrix) -> tuple[float, float]:
    """(node %, edge %): share of the truth's types and transition edges
    that also occur in the generated population."""
    truth_nodes = set(np.nonzero(truth.counts.sum(axis=1)[1:END_STATE])[0] + 1)
    gen_nodes = set(np.nonzero(gen.counts.sum(axis=1)[1:END_STATE])[0] + 1)
    node_pct = 100.0 * len(truth_nodes & gen_nodes) / len(truth_nodes) if truth_nodes else 100.0
    truth_edges = set(zip(*np.nonzero(truth.counts)))
    gen_edges = set(zip(*np.nonzero(gen.counts)))
    edge_pct = 100.0 * len(truth_edges & gen_edges) / len(truth_edges) if truth_edges else 100.0
    return node_pct, edge_pct


def frobenius(gen: TransitionMatrix, truth: TransitionMatrix) -> float:
    """Frobenius norm of the difference of transition probabilities; rows
    without observations compare as all-zero."""
    return float(np.linalg.norm(gen.probs - truth.probs))


def od_cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of flattened OD matrices."""
    av = np.asarray(a, dtype=float).ravel()
    bv = np.asarray(b, dtype=float).ravel()
    if av.shape != bv.shape:
        raise ValueError("OD matrices must share a shape")
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(av @ bv / (na * nb))


def od_count_mape(gen: np.ndarray, truth: np.ndarray) -> float:
    """Mean absolute percentage error over entries with positive truth."""
    g = np.asarray(gen, dtype=float)
    t = np.asarray(truth, dtype=float)
    if g.shape != t.shape:
        raise ValueError("OD matrices must share a shape")
    mask = t > 0
    if not mask.any():
        return 0.0
    return float(100.0 * np.mean(np.abs(g[mask] - t[mask]) / t[mask]))


@dataclass(frozen=True)
class MetricsReport:
    jsd_length: float
    jsd_duration: float
    jsd_start: float
    jsd_end: float
    jsd_type: float
    node_completeness: float
    edge_completeness: float
    frobenius: float
    od_cosine: float | None = None
    od_mape: float | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))

    CSV_FIELDS = ("jsd_length", "jsd_duration", "jsd_start", "jsd_end", "jsd_type",
                  "node_completeness", "edge_completeness", "frobenius",
                  "od_cosine", "od_mape")

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(cls.CSV_FIELDS)

    def to_csv_row(self) -> str:
        vals = asdict(self)
        return ",".join("" if vals[f] is None else repr(vals[f]) for f in self.CSV_FIELDS)


def report(
    gen_chains: Sequence[ActivityChain],
    truth_chains: Sequence[ActivityChain],
    gen_od: np.ndarray | None = None,
    truth_od: np.ndarray | None = None,
) -> MetricsReport:
    """Full comparison of a generated chain population against a truth set."""
    gh = chain_histograms(gen_chains)
    th = chain_histograms(truth_chains)
    gt = transition_matrix(gen_chains)
    tt = transition_matrix(truth_chains)
    node_pct, edge_pct = completeness(gt, tt)
    od_cos = od_mape = None
    if gen_od is not None and truth_od is not None:
        od_cos = od_cosine(gen_od, truth_od)
        od_mape = od_count_mape(gen_od, truth_od)
    return MetricsReport(
        jsd_length=jsd(gh["length"], th["length"]),
        jsd_duration=jsd(gh["duration"], th["duration"]),
        jsd_start=jsd(gh["start"], th["start"]),
        jsd_end=jsd(gh["end"], th["end"]),
        jsd_type=jsd(gh["type"], th["type"]),
        node_completeness=node_pct,
        edge_completeness=edge_pct,
        frobenius=frobenius(gt, tt),
        od_cosine=od_cos,
        od_mape=od_mape,
    )
