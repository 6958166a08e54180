"""A synthetic 8-sub-region, 100-zone city with a known generating process.

The city is a disk split into four sectors and two rings: sub-regions 1-4
are the inner-ring sectors (dense, work-rich), 5-8 the outer-ring sectors
(residential).  ``reference_assign`` places chains on the city with a
gravity process -- exponential distance decay toward the previous zone and
the next anchor -- which serves as ground truth: location assignment is
evaluated by how well it reproduces this process's sub-region activity
counts and origin-destination structure without ever seeing its code path.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .ala import AgentPlan, Zone, ZoneMap, build_zone_map, land_use_of
from .core import ActivityType, Trajectory
from .ingest import EncodedSample

N_SUB_REGIONS = 8
N_ZONES = 100

_INNER_PER_SECTOR = 15
_OUTER_PER_SECTOR = 10
_INNER_RADIUS = (0.5, 4.0)
_OUTER_RADIUS = (4.0, 10.0)


def make_city(seed: int = 0) -> ZoneMap:
    """Build the repo's reference city: 100 zones over 8 sub-regions.

    Zone positions are random within each annulus sector but land-use
    counts are fixed per sector (a planned city): every zone can house
    agents, work concentrates in the inner ring, and every sub-region has
    schools and "other" destinations so all assignments are feasible.
    Equal sector capacities keep the achievable count imbalances radial,
    which is the axis refinement can actually steer.
    """
    rng = np.random.default_rng(seed)
    zones: list[Zone] = []
    zone_id = 1
    for ring, (r_lo, r_hi), per_sector, n_work, n_other in (
        (0, _INNER_RADIUS, _INNER_PER_SECTOR, 9, 12),
        (1, _OUTER_RADIUS, _OUTER_PER_SECTOR, 3, 7),
    ):
        for sector in range(4):
            sub_region = ring * 4 + sector + 1
            ang_lo = sector * np.pi / 2.0
            for j in range(per_sector):
                # sqrt keeps density uniform in area within the annulus
                u = rng.random()
                r = np.sqrt(r_lo**2 + u * (r_hi**2 - r_lo**2))
                theta = ang_lo + rng.random() * np.pi / 2.0
                uses = {"home"}
                if j < n_work:
                    uses.add("work")
                if j < 2:
                    uses.add("school")
                if j >= per_sector - n_other:
                    uses.add("other")
                zones.append(
                    Zone(
                        zone_id=zone_id,
                        x=float(r * np.cos(theta)),
                        y=float(r * np.sin(theta)),
                        land_uses=frozenset(uses),
                        sub_region=sub_region,
                    )
                )
                zone_id += 1
    return build_zone_map(zones)


def sample_home_zones(zone_map: ZoneMap, n: int, seed: int = 0) -> list[int]:
    """Draw n home zone ids, weighted toward the residential outer ring."""
    rng = np.random.default_rng(seed)
    candidates = zone_map.by_land_use["home"]
    sub = zone_map.sub_region_of[candidates]
    weights = np.where(sub > 4, 1.5, 1.0)
    weights = weights / weights.sum()
    rows = rng.choice(candidates, size=n, p=weights)
    return [zone_map.zones[int(r)].zone_id for r in rows]


def plans_from_samples(
    samples: Sequence[EncodedSample], zone_map: ZoneMap, seed: int = 0
) -> list[AgentPlan]:
    """Attach home zones to diary samples; household members share theirs."""
    household_ids: list[str] = []
    for s in samples:
        if not household_ids or household_ids[-1] != s.household_id:
            household_ids.append(s.household_id)
    unique = sorted(set(household_ids), key=household_ids.index)
    homes = dict(zip(unique, sample_home_zones(zone_map, len(unique), seed)))
    return [
        AgentPlan(
            agent_id=f"{s.household_id}#{s.target_index}",
            chain=s.chain,
            home_zone=homes[s.household_id],
        )
        for s in samples
    ]


def reference_assign(
    plans: Sequence[AgentPlan],
    zone_map: ZoneMap,
    seed: int = 0,
    commute_scale: float = 3.5,
    trip_scale: float = 2.0,
    anchor_pull: float = 0.5,
) -> list[Trajectory]:
    """Ground-truth gravity assignment of chains to zones.

    Mandatory zones are drawn with probability proportional to
    exp(-distance/commute_scale); every other activity draws its zone with
    probability proportional to exp(-(d_prev + anchor_pull * d_anchor) /
    trip_scale), a detour-averse kernel that induces short trips roughly
    aligned with the path to the next anchor.
    """
    M_d = zone_map.distance
    out: list[Trajectory] = []
    for i, plan in enumerate(plans):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        home = zone_map.row(plan.home_zone)
        daily: dict[int, int] = {int(ActivityType.HOME): home}
        for kind in (int(ActivityType.WORK), int(ActivityType.SCHOOL)):
            if any(a.kind == kind for a in plan.chain):
                cands = zone_map.by_land_use[land_use_of(kind)]
                w = np.exp(-M_d[home, cands] / commute_scale)
                daily[kind] = int(rng.choice(cands, p=w / w.sum()))

        anchors = _next_anchor_rows(plan, daily, home)
        rows: list[int] = []
        prev = home
        for j, a in enumerate(plan.chain):
            if a.kind in daily:
                r = daily[a.kind]
            else:
                cands = zone_map.by_land_use[land_use_of(a.kind)]
                cost = M_d[prev, cands] + anchor_pull * M_d[cands, anchors[j]]
                w = np.exp(-cost / trip_scale)
                r = int(rng.choice(cands, p=w / w.sum()))
            rows.append(r)
            prev = r
        out.append(
            Trajectory(
                agent_id=plan.agent_id,
                chain=plan.chain,
                zones=tuple(zone_map.zones[r].zone_id for r in rows),
            )
        )
    return out


def _next_anchor_rows(plan: AgentPlan, daily: dict[int, int], home: int) -> list[int]:
    out = [home] * len(plan.chain)
    nxt = home
    for j in range(len(plan.chain) - 1, -1, -1):
        if plan.chain[j].kind in daily:
            nxt = daily[plan.chain[j].kind]
        out[j] = nxt
    return out
