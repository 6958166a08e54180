"""Zone-level location assignment for generated activity chains.

A city is a set of planar zones, each with a centroid, a land-use set and a
sub-region label.  Assignment walks every agent's chain and picks one zone
per activity:

* Home activities always map to the agent's home zone.
* Mandatory activities (Work, School) get a zone whose distance from home
  matches a draw from the home sub-region's empirical commute-distance
  distribution; the same zone is reused for every same-type mandatory
  activity that day.
* All other activities are placed between anchors (home and mandatory
  zones): a distance and an angular deviation from the direct path to the
  next anchor are drawn from the previous zone's sub-region distributions,
  and the best-matching zones compete for the pick.

An iterative refinement loop then nudges the distance distributions until
per-sub-region activity counts match externally supplied targets.

All randomness flows through per-agent ``numpy`` generator streams derived
from a single seed, so results are reproducible and independent of how the
agent list is chunked or scheduled.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import Activity, ActivityChain, ActivityType, Trajectory, chain_from_triples
from .errors import AssignmentError, ConfigError

logger = logging.getLogger(__name__)

LAND_USES = ("home", "work", "school", "other")

# Activity types that pin an agent to a fixed daily zone.  Everything else
# draws a fresh zone from the "other" land use.
_ANCHOR_TYPES = frozenset({ActivityType.HOME, ActivityType.WORK, ActivityType.SCHOOL})

_LAND_USE_OF_TYPE = {
    int(ActivityType.HOME): "home",
    int(ActivityType.WORK): "work",
    int(ActivityType.SCHOOL): "school",
}


def land_use_of(kind: int) -> str:
    """Land use a given activity type occupies (default "other")."""
    return _LAND_USE_OF_TYPE.get(int(kind), "other")


def wrap_angle(a: np.ndarray | float) -> np.ndarray | float:
    """Wrap angles to the interval (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    if np.ndim(a) == 0:
        return float(w)
    return w


# ---------------------------------------------------------------------------
# Zones
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Zone:
    """One traffic analysis zone: centroid in km, land uses, sub-region."""

    zone_id: int
    x: float
    y: float
    land_uses: frozenset[str]
    sub_region: int

    def __post_init__(self) -> None:
        if not self.land_uses:
            raise ConfigError(f"zone {self.zone_id}: empty land-use set")
        unknown = set(self.land_uses) - set(LAND_USES)
        if unknown:
            raise ConfigError(f"zone {self.zone_id}: unknown land uses {sorted(unknown)}")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ConfigError(f"zone {self.zone_id}: non-finite centroid")


@dataclass(frozen=True)
class ZoneMap:
    """Zones plus precomputed pairwise geometry and lookup tables.

    ``distance`` is symmetric Euclidean km with a zero diagonal;
    ``bearing[i, j]`` is the direction from zone i to zone j in radians,
    measured counter-clockwise from east, wrapped to (-pi, pi], with the
    diagonal defined as 0.
    """

    zones: tuple[Zone, ...]
    distance: np.ndarray
    bearing: np.ndarray
    index: dict[int, int] = field(repr=False)
    by_land_use: dict[str, np.ndarray] = field(repr=False)
    sub_region_of: np.ndarray = field(repr=False)
    sub_regions: tuple[int, ...]
    diameter: float

    def __len__(self) -> int:
        return len(self.zones)

    def row(self, zone_id: int) -> int:
        try:
            return self.index[zone_id]
        except KeyError:
            raise AssignmentError(f"unknown zone id {zone_id}") from None

    def zone(self, zone_id: int) -> Zone:
        return self.zones[self.row(zone_id)]


def build_zone_map(zones: Iterable[Zone]) -> ZoneMap:
    """Compute distance and bearing matrices and lookup tables for a zone set."""
    zs = tuple(zones)
    if not zs:
        raise ConfigError("zone map needs at least one zone")
    ids = [z.zone_id for z in zs]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise ConfigError(f"duplicate zone ids {dup}")

    xy = np.array([[z.x, z.y] for z in zs], dtype=np.float64)
    dx = xy[:, 0][None, :] - xy[:, 0][:, None]
    dy = xy[:, 1][None, :] - xy[:, 1][:, None]
    distance = np.hypot(dx, dy)
    bearing = np.arctan2(dy, dx)
    bearing = np.where(bearing == -np.pi, np.pi, bearing)
    np.fill_diagonal(bearing, 0.0)

    by_land_use = {
        lu: np.array([i for i, z in enumerate(zs) if lu in z.land_uses], dtype=np.intp)
        for lu in LAND_USES
    }
    return ZoneMap(
        zones=zs,
        distance=distance,
        bearing=bearing,
        index={z.zone_id: i for i, z in enumerate(zs)},
        by_land_use=by_land_use,
        sub_region_of=np.array([z.sub_region for z in zs], dtype=np.int64),
        sub_regions=tuple(sorted({z.sub_region for z in zs})),
        diameter=float(distance.max()),
    )


# ---------------------------------------------------------------------------
# Empirical distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalSampler:
    """A normalized histogram sampled by inverse CDF, uniform within a bin."""

    edges: np.ndarray
    masses: np.ndarray

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.masses) + 1:
            raise ConfigError("sampler needs len(edges) == len(masses) + 1")
        if np.any(np.diff(self.edges) <= 0):
            raise ConfigError("sampler bin edges must be strictly increasing")
        if np.any(self.masses < 0) or abs(float(self.masses.sum()) - 1.0) > 1e-9:
            raise ConfigError("sampler masses must be non-negative and sum to 1")

    @classmethod
    def from_observations(cls, values: np.ndarray, edges: np.ndarray) -> "EmpiricalSampler":
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise ValueError("cannot fit a sampler to zero observations")
        counts, _ = np.histogram(np.clip(values, edges[0], edges[-1]), bins=edges)
        masses = counts / counts.sum()
        return cls(edges=np.asarray(edges, dtype=np.float64), masses=masses)

    def sample(self, rng: np.random.Generator) -> float:
        b = int(np.searchsorted(np.cumsum(self.masses), rng.random(), side="right"))
        b = min(b, len(self.masses) - 1)
        lo, hi = self.edges[b], self.edges[b + 1]
        return float(lo + (hi - lo) * rng.random())

    def mean(self) -> float:
        mids = 0.5 * (self.edges[:-1] + self.edges[1:])
        return float(mids @ self.masses)

    def stretched(self, factor: float) -> "EmpiricalSampler":
        """Shift mass toward longer (factor > 1) or shorter (factor < 1)
        bins by dilating the value axis about zero and re-binning.

        The new mass of bin j is F(edge[j+1]/factor) - F(edge[j]/factor)
        with F the piecewise-linear CDF of the current histogram; mass
        dilated past the last edge collapses into the last bin.  Unlike a
        per-bin reweighting this moves support, so repeated small stretches
        can reach distances the original observations never contained.
        """
        if factor <= 0:
            raise ConfigError("stretch factor must be positive")
        if factor == 1.0 or len(self.masses) == 1:
            return self
        cdf = np.concatenate([[0.0], np.cumsum(self.masses)])
        f_at = np.interp(self.edges / factor, self.edges, cdf, left=0.0, right=1.0)
        masses = np.diff(f_at)
        masses[-1] = 1.0 - f_at[-2]
        masses = np.clip(masses, 0.0, None)
        masses = masses / masses.sum()
        return replace(self, masses=masses)


@dataclass(frozen=True)
class DistributionSet:
    """Per-sub-region samplers: ``md`` mandatory (home-to-work/school)
    distances, ``nmd`` non-mandatory trip distances, ``ad`` angular
    deviations from the direct path to the next anchor."""

    md: dict[int, EmpiricalSampler]
    nmd: dict[int, EmpiricalSampler]
    ad: dict[int, EmpiricalSampler]


def fit_distributions(
    trajectories: Sequence[Trajectory],
    zone_map: ZoneMap,
    n_distance_bins: int = 50,
    n_angle_bins: int = 36,
) -> DistributionSet:
    """Fit the per-sub-region distance and angle histograms from reference
    trajectories that already have zones assigned.

    Distance bins cover [0, map diameter]; angle bins cover (-pi, pi].
    A sub-region with zero observations of a kind falls back to the pooled
    global histogram (logged).
    """
    if not trajectories:
        raise AssignmentError("cannot fit distributions to an empty reference set")
    dist_edges = np.linspace(0.0, max(zone_map.diameter, 1e-9), n_distance_bins + 1)
    ang_edges = np.linspace(-np.pi, np.pi, n_angle_bins + 1)

    md_obs: dict[int, list[float]] = {r: [] for r in zone_map.sub_regions}
    nmd_obs: dict[int, list[float]] = {r: [] for r in zone_map.sub_regions}
    ad_obs: dict[int, list[float]] = {r: [] for r in zone_map.sub_regions}

    M_d, M_a, sub = zone_map.distance, zone_map.bearing, zone_map.sub_region_of
    for traj in trajectories:
        rows = [zone_map.row(z) for z in traj.zones]
        home = _home_row(traj.chain, rows)
        seen_mandatory: set[int] = set()
        for a, r in zip(traj.chain, rows):
            if a.kind in (ActivityType.WORK, ActivityType.SCHOOL) and a.kind not in seen_mandatory:
                seen_mandatory.add(a.kind)
                md_obs[sub[home]].append(float(M_d[home, r]))
        anchor_rows = _next_anchor_rows(traj.chain, rows, home)
        for j in range(1, len(rows)):
            if ActivityType(traj.chain[j].kind) in _ANCHOR_TYPES:
                continue
            prev, cur = rows[j - 1], rows[j]
            nmd_obs[sub[prev]].append(float(M_d[prev, cur]))
            if prev != anchor_rows[j]:
                # deviation from the direct path is undefined when the
                # trip starts at its own anchor
                dev = wrap_angle(M_a[prev, cur] - M_a[prev, anchor_rows[j]])
                ad_obs[sub[prev]].append(float(dev))

    return DistributionSet(
        md=_samplers_with_fallback("md", md_obs, dist_edges),
        nmd=_samplers_with_fallback("nmd", nmd_obs, dist_edges),
        ad=_samplers_with_fallback("ad", ad_obs, ang_edges),
    )


def _home_row(chain: ActivityChain, rows: Sequence[int]) -> int:
    for a, r in zip(chain, rows):
        if a.kind == ActivityType.HOME:
            return r
    return rows[0]


def _next_anchor_rows(chain: ActivityChain, rows: Sequence[int], home: int) -> list[int]:
    """For each position, the zone row of the next anchor activity at or
    after it (the home row when the chain ends without one)."""
    out = [home] * len(rows)
    nxt = home
    for j in range(len(rows) - 1, -1, -1):
        if ActivityType(chain[j].kind) in _ANCHOR_TYPES:
            nxt = rows[j]
        out[j] = nxt
    return out


def _samplers_with_fallback(
    kind: str, obs: dict[int, list[float]], edges: np.ndarray
) -> dict[int, EmpiricalSampler]:
    pooled = [v for vs in obs.values() for v in vs]
    if not pooled:
        raise AssignmentError(f"no reference observations at all for {kind!r}")
    global_sampler = EmpiricalSampler.from_observations(np.array(pooled), edges)
    out: dict[int, EmpiricalSampler] = {}
    for r, vs in obs.items():
        if vs:
            out[r] = EmpiricalSampler.from_observations(np.array(vs), edges)
        else:
            logger.warning("sub-region %s has no %s observations; using global histogram", r, kind)
            out[r] = global_sampler
    return out


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlaConfig:
    """Knobs for matching and refinement.

    ``threshold`` is the max per-sub-region relative count error accepted by
    ``refine``; ``margin`` the per-iteration histogram adjustment cap;
    ``k_candidates`` the size of the best-match set sampled uniformly;
    ``alpha``/``beta`` weight distance error vs (diameter-scaled) angle
    error in the match score.
    """

    threshold: float = 0.10
    margin: float = 0.05
    max_iterations: int = 30
    k_candidates: int = 5
    alpha: float = 1.0
    beta: float = 1.0
    n_distance_bins: int = 50
    n_angle_bins: int = 36
    seed: int = 0

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ConfigError("threshold must be positive")
        if not 0.0 <= self.margin <= 1.0:
            raise ConfigError("margin must lie in [0, 1]")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be non-negative")
        if self.k_candidates < 1:
            raise ConfigError("k_candidates must be at least 1")
        if self.n_distance_bins < 1 or self.n_angle_bins < 1:
            raise ConfigError("bin counts must be at least 1")


@dataclass(frozen=True)
class AgentPlan:
    """Input to assignment: one agent's chain plus their home zone id."""

    agent_id: str
    chain: ActivityChain
    home_zone: int


def _pick_among_best(
    score: np.ndarray, candidates: np.ndarray, k: int, rng: np.random.Generator
) -> int:
    """Uniform choice among the k lowest-scoring candidates.

    Ties are broken by candidate order (stable sort) so the choice set is
    platform-independent.
    """
    order = np.argsort(score, kind="stable")
    take = min(k, len(candidates))
    return int(candidates[order[int(rng.integers(take))]])


def assign_mandatory(
    home_zone: int,
    kind: int,
    dists: DistributionSet,
    zone_map: ZoneMap,
    rng: np.random.Generator,
    k: int = 5,
) -> int:
    """Zone for a Work or School activity: draw a commute distance from the
    home sub-region's distribution and pick among the k zones of the
    required land use whose distance from home matches best."""
    land_use = land_use_of(kind)
    if land_use not in ("work", "school"):
        raise AssignmentError(f"activity type {kind} is not mandatory")
    home = zone_map.row(home_zone)
    candidates = zone_map.by_land_use[land_use]
    if candidates.size == 0:
        raise AssignmentError(f"no zone offers land use {land_use!r}")
    target = dists.md[int(zone_map.sub_region_of[home])].sample(rng)
    score = np.abs(zone_map.distance[home, candidates] - target)
    row = _pick_among_best(score, candidates, k, rng)
    return zone_map.zones[row].zone_id


def assign_nonmandatory(
    prev_zone: int,
    anchor_zone: int,
    kind: int,
    dists: DistributionSet,
    zone_map: ZoneMap,
    rng: np.random.Generator,
    k: int = 5,
    alpha: float = 1.0,
    beta: float = 1.0,
) -> int:
    """Zone for a non-mandatory activity between two anchors.

    Draw a trip distance and an angular deviation from the previous zone's
    sub-region distributions; the target direction is the bearing to the
    next anchor plus the deviation.  Candidates are scored by
    ``alpha * |distance error| + beta * diameter * |angle error|`` and the
    pick is uniform among the k best.  When the trip starts at its own
    anchor there is no direct path to deviate from, so the score uses the
    distance term alone.
    """
    prev = zone_map.row(prev_zone)
    anchor = zone_map.row(anchor_zone)
    candidates = zone_map.by_land_use[land_use_of(kind)]
    if candidates.size == 0:
        raise AssignmentError(f"no zone offers land use {land_use_of(kind)!r}")
    sr = int(zone_map.sub_region_of[prev])
    target_dist = dists.nmd[sr].sample(rng)
    score = alpha * np.abs(zone_map.distance[prev, candidates] - target_dist)
    if prev != anchor:
        deviation = dists.ad[sr].sample(rng)
        target_ang = wrap_angle(zone_map.bearing[prev, anchor] + deviation)
        a_err = np.abs(wrap_angle(zone_map.bearing[prev, candidates] - target_ang))
        score = score + beta * zone_map.diameter * a_err
    row = _pick_among_best(score, candidates, k, rng)
    return zone_map.zones[row].zone_id


def _assign_agent(
    plan: AgentPlan,
    dists: DistributionSet,
    zone_map: ZoneMap,
    config: AlaConfig,
    rng: np.random.Generator,
) -> Trajectory:
    home = plan.home_zone
    zone_map.row(home)  # validates the id early
    kinds = {a.kind for a in plan.chain}
    daily: dict[int, int] = {int(ActivityType.HOME): home}
    # One workplace and one school per agent-day, drawn in fixed type order.
    for kind in (int(ActivityType.WORK), int(ActivityType.SCHOOL)):
        if kind in kinds:
            daily[kind] = assign_mandatory(
                home, kind, dists, zone_map, rng, k=config.k_candidates
            )

    zones: list[int] = []
    prev = home  # the day implicitly starts from home
    anchors = _next_anchor_ids(plan.chain, daily, home)
    for j, a in enumerate(plan.chain):
        if a.kind in daily:
            z = daily[a.kind]
        else:
            z = assign_nonmandatory(
                prev,
                anchors[j],
                a.kind,
                dists,
                zone_map,
                rng,
                k=config.k_candidates,
                alpha=config.alpha,
                beta=config.beta,
            )
        zones.append(z)
        prev = z
    return Trajectory(agent_id=plan.agent_id, chain=plan.chain, zones=tuple(zones))


def _next_anchor_ids(chain: ActivityChain, daily: dict[int, int], home: int) -> list[int]:
    out = [home] * len(chain)
    nxt = home
    for j in range(len(chain) - 1, -1, -1):
        if chain[j].kind in daily:
            nxt = daily[chain[j].kind]
        out[j] = nxt
    return out


def assign_population(
    plans: Sequence[AgentPlan],
    dists: DistributionSet,
    zone_map: ZoneMap,
    config: AlaConfig,
) -> list[Trajectory]:
    """Assign zones to every agent's chain.

    Each agent draws from an independent generator seeded by
    ``(config.seed, position)``, so the output is deterministic and
    unaffected by chunking or evaluation order.
    """
    out: list[Trajectory] = []
    for i, plan in enumerate(plans):
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, i)))
        try:
            out.append(_assign_agent(plan, dists, zone_map, config, rng))
        except AssignmentError as e:
            raise AssignmentError(f"agent {plan.agent_id}: {e}") from e
    return out


# ---------------------------------------------------------------------------
# Refinement
# ---------------------------------------------------------------------------


def sub_region_counts(trajectories: Sequence[Trajectory], zone_map: ZoneMap) -> dict[int, int]:
    """Number of assigned activities falling in each sub-region."""
    counts = dict.fromkeys(zone_map.sub_regions, 0)
    for traj in trajectories:
        for z in traj.zones:
            counts[int(zone_map.sub_region_of[zone_map.row(z)])] += 1
    return counts


def _mean_subregion_distance(zone_map: ZoneMap) -> np.ndarray:
    """S x S matrix of mean zone-to-zone distances between sub-regions."""
    srs = zone_map.sub_regions
    rows = {r: np.flatnonzero(zone_map.sub_region_of == r) for r in srs}
    out = np.zeros((len(srs), len(srs)))
    for i, a in enumerate(srs):
        for j, b in enumerate(srs):
            out[i, j] = zone_map.distance[np.ix_(rows[a], rows[b])].mean()
    return out


def refine(
    plans: Sequence[AgentPlan],
    targets: Mapping[int, int],
    dists: DistributionSet,
    zone_map: ZoneMap,
    config: AlaConfig,
) -> tuple[DistributionSet, list[dict]]:
    """Adjust distance distributions until per-sub-region activity counts
    match the targets.

    Each iteration assigns the sample population, measures the signed
    relative count error per sub-region, and stretches every sub-region's
    distance histograms toward longer bins when the error mass sits in
    sub-regions far from it (under-visited remote areas) or toward shorter
    bins in the opposite case, by at most ``config.margin`` relative
    dilation per iteration.  Angle distributions are never adjusted.
    Returns the best samplers seen (by max relative error) plus a
    per-iteration trace.
    """
    missing = [r for r in zone_map.sub_regions if r not in targets]
    if missing:
        raise AssignmentError(f"targets missing sub-regions {missing}")
    if any(targets[r] <= 0 for r in zone_map.sub_regions):
        raise AssignmentError("sub-region targets must be positive")

    srs = zone_map.sub_regions
    target_vec = np.array([targets[r] for r in srs], dtype=np.float64)
    mean_dist = _mean_subregion_distance(zone_map)
    # Per origin sub-region: distances to every sub-region scaled to [-1, 1]
    # so "remote" and "nearby" carry opposite signs in the error signal.
    span = mean_dist.max(axis=1, keepdims=True) - mean_dist.min(axis=1, keepdims=True)
    span[span == 0] = 1.0
    radial = 2.0 * (mean_dist - mean_dist.min(axis=1, keepdims=True)) / span - 1.0

    best = (math.inf, dists)
    trace: list[dict] = []
    current = dists
    for it in range(config.max_iterations):
        assigned = assign_population(plans, current, zone_map, config)
        counts = sub_region_counts(assigned, zone_map)
        count_vec = np.array([counts[r] for r in srs], dtype=np.float64)
        signed = (target_vec - count_vec) / target_vec  # > 0 means under-visited
        max_rel = float(np.abs(signed).max())
        trace.append(
            {
                "iteration": it,
                "max_rel_error": max_rel,
                "counts": {r: int(c) for r, c in zip(srs, count_vec)},
                "signed_error": {r: float(e) for r, e in zip(srs, signed)},
            }
        )
        if max_rel < best[0]:
            best = (max_rel, current)
        if max_rel < config.threshold:
            break
        # Error mass correlated with distance-from-q decides q's stretch.
        signal = radial @ signed
        factors = 1.0 + config.margin * np.clip(signal, -1.0, 1.0)
        current = DistributionSet(
            md={r: current.md[r].stretched(f) for r, f in zip(srs, factors)},
            nmd={r: current.nmd[r].stretched(f) for r, f in zip(srs, factors)},
            ad=current.ad,
        )
    return best[1], trace


# ---------------------------------------------------------------------------
# OD matrices and file formats
# ---------------------------------------------------------------------------


def build_od(
    trajectories: Sequence[Trajectory], zone_map: ZoneMap, aggregation: str = "zone"
) -> np.ndarray:
    """Count consecutive-activity transitions between zones or sub-regions.

    The matrix is square and integer; staying in the same zone counts on
    the diagonal.  Total mass is the number of transitions, i.e. the sum of
    (chain length - 1) over agents.
    """
    if not trajectories:
        raise AssignmentError("cannot build an OD matrix from zero trajectories")
    if aggregation == "zone":
        idx_of = {zid: i for zid, i in zone_map.index.items()}
        n = len(zone_map)
    elif aggregation == "sub_region":
        sr_index = {r: i for i, r in enumerate(zone_map.sub_regions)}
        idx_of = {
            zid: sr_index[int(zone_map.sub_region_of[row])]
            for zid, row in zone_map.index.items()
        }
        n = len(zone_map.sub_regions)
    else:
        raise ConfigError(f"unknown aggregation {aggregation!r}")

    od = np.zeros((n, n), dtype=np.int64)
    for traj in trajectories:
        rows = [idx_of[z] for z in traj.zones]
        for a, b in zip(rows[:-1], rows[1:]):
            od[a, b] += 1
    return od


def od_labels(zone_map: ZoneMap, aggregation: str = "zone") -> tuple[int, ...]:
    if aggregation == "zone":
        return tuple(z.zone_id for z in zone_map.zones)
    if aggregation == "sub_region":
        return zone_map.sub_regions
    raise ConfigError(f"unknown aggregation {aggregation!r}")


def write_od_csv(path: str | Path, od: np.ndarray, labels: Sequence[int]) -> None:
    """OD matrix as CSV with the ids as header row and leading column."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["od"] + [str(l) for l in labels])
        for label, row in zip(labels, od):
            w.writerow([str(label)] + [str(int(v)) for v in row])


def read_zone_csv(path: str | Path) -> ZoneMap:
    """Zone file: CSV with columns id, x_km, y_km, land_uses (|-separated),
    sub_region."""
    zones = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"id", "x_km", "y_km", "land_uses", "sub_region"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ConfigError(f"zone file {path} must have columns {sorted(required)}")
        for rec in reader:
            zones.append(
                Zone(
                    zone_id=int(rec["id"]),
                    x=float(rec["x_km"]),
                    y=float(rec["y_km"]),
                    land_uses=frozenset(u for u in rec["land_uses"].split("|") if u),
                    sub_region=int(rec["sub_region"]),
                )
            )
    return build_zone_map(zones)


def write_zone_csv(path: str | Path, zone_map: ZoneMap) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["id", "x_km", "y_km", "land_uses", "sub_region"])
        for z in zone_map.zones:
            w.writerow(
                [z.zone_id, repr(z.x), repr(z.y), "|".join(sorted(z.land_uses)), z.sub_region]
            )


def write_trajectories(path: str | Path, trajectories: Sequence[Trajectory]) -> None:
    """JSON lines: {"agent_id", "chain" as [type, start, end] triples, "zones"}."""
    with open(path, "w") as f:
        for t in trajectories:
            rec = {
                "agent_id": t.agent_id,
                "chain": [[a.kind, a.start, a.end] for a in t.chain],
                "zones": list(t.zones),
            }
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_trajectories(path: str | Path) -> list[Trajectory]:
    out = []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                Trajectory(
                    agent_id=rec["agent_id"],
                    chain=chain_from_triples(rec["chain"]),
                    zones=tuple(int(z) for z in rec["zones"]),
                )
            )
    return out
