"""Intra-cloud relay placement: stabbing, hub conversion, and greedy stitching."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .decomposition import Decomposition, Instance, UnionFind
from .geometry import (
    DEFAULT_EPS,
    Point,
    candidate_points,
    coverage_sets,
    dist,
)

# Enumeration budget for exact stabbings: subsets examined, not candidates.
SUBSET_CAP = 10**7


@dataclass
class StabSet:
    """Stab points plus, for each point, the set of blob ids it pierces.

    A stab pierces a blob when it lies within distance 1 of one of the blob's
    sensors (closed, eps-tolerant).
    """

    points: list[Point]
    covered: list[set[int]]

    def blobs_covered(self) -> set[int]:
        out: set[int] = set()
        for s in self.covered:
            out |= s
        return out


@dataclass
class HubSet:
    """Relay points that connect one cloud without relay-to-relay long hops."""

    points: list[Point]


def _sort_key(p: Point) -> tuple[float, float]:
    return (p.x, p.y)


def _blob_masks(
    inst: Instance, dec: Decomposition, cands: list[Point], eps: float
) -> list[int]:
    """Bitmask of blob ids covered by each candidate (bit b set = blob b pierced)."""
    masks = []
    for hit in coverage_sets(cands, inst.sensors, 1.0, eps=eps):
        m = 0
        for si in hit:
            m |= 1 << dec.blob_of[si]
        masks.append(m)
    return masks


def greedy_stabs(inst: Instance, dec: Decomposition, eps: float = DEFAULT_EPS) -> StabSet:
    """Greedy set cover over blobs: repeatedly stab the most not-yet-stabbed blobs.

    Candidates are the unit-disk arrangement points over all sensors. Since a
    single point can pierce at most 5 disjoint blobs, the greedy cover is
    within a factor 1 + 1/2 + 1/3 + 1/4 + 1/5 = 137/60 of the optimum.
    """
    cands = sorted(candidate_points(inst.sensors, 1.0, eps=eps), key=_sort_key)
    masks = _blob_masks(inst, dec, cands, eps)
    full = (1 << dec.n_blobs) - 1
    covered = 0
    points: list[Point] = []
    covered_sets: list[set[int]] = []
    while covered != full:
        best_i, best_gain = -1, 0
        for i, m in enumerate(masks):
            gain = (m & ~covered).bit_count()
            if gain > best_gain:
                best_i, best_gain = i, gain
        assert best_gain > 0, "no candidate pierces an uncovered blob"
        # greedy dominance: the chosen gain is maximal at this iteration
        assert all((m & ~covered).bit_count() <= best_gain for m in masks)
        m = masks[best_i]
        points.append(cands[best_i])
        covered_sets.append({b for b in range(dec.n_blobs) if m >> b & 1})
        covered |= m
    return StabSet(points=points, covered=covered_sets)


def _cloud_candidates_masks(
    inst: Instance, dec: Decomposition, cloud: int, eps: float
) -> tuple[list[Point], list[int]]:
    sensors = [inst.sensors[i] for i in dec.cloud_sensors[cloud]]
    cands = sorted(candidate_points(sensors, 1.0, eps=eps), key=_sort_key)
    masks = _blob_masks(inst, dec, cands, eps)
    return cands, masks


def _dedup_by_mask(cands: list[Point], masks: list[int]) -> tuple[list[Point], list[int]]:
    # identical coverage -> interchangeable for stabbing; keep first occurrence
    seen: set[int] = set()
    cs, ms = [], []
    for c, m in zip(cands, masks):
        if m and m not in seen:
            seen.add(m)
            cs.append(c)
            ms.append(m)
    return cs, ms


def _min_stab_subset(
    cands: list[Point],
    masks: list[int],
    full: int,
    max_size: int,
    cap: int = SUBSET_CAP,
) -> list[int] | None:
    """Smallest candidate subset whose masks OR to full, searching sizes 1..max_size.

    Returns indices into cands, or None if no subset of size <= max_size works
    or the enumeration would exceed cap subsets.
    """
    union_all = 0
    for m in masks:
        union_all |= m
    if union_all & full != full:
        return None
    for size in range(1, max_size + 1):
        if math.comb(len(cands), size) > cap:
            return None
        for combo in itertools.combinations(range(len(cands)), size):
            acc = 0
            for i in combo:
                acc |= masks[i]
            if acc & full == full:
                return list(combo)
    return None


def exact_stabs(
    inst: Instance,
    dec: Decomposition,
    cloud: int,
    k: int,
    eps: float = DEFAULT_EPS,
    cap: int = SUBSET_CAP,
) -> StabSet | None:
    """Minimum stabbing of the cloud's blobs if it needs fewer than k stabs.

    Enumerates subsets of arrangement candidates of size 1..k-1 (candidates
    with identical blob coverage collapsed first). Returns None when every
    stabbing needs at least k points or the enumeration exceeds cap subsets.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cands, masks = _cloud_candidates_masks(inst, dec, cloud, eps)
    cands, masks = _dedup_by_mask(cands, masks)
    full = 0
    for b in dec.blobs_in_cloud[cloud]:
        full |= 1 << b
    combo = _min_stab_subset(cands, masks, full, k - 1, cap=cap)
    if combo is None:
        return None
    points = [cands[i] for i in combo]
    covered = [{b for b in range(dec.n_blobs) if masks[i] >> b & 1} for i in combo]
    return StabSet(points=points, covered=covered)


def min_stab_count(
    inst: Instance,
    dec: Decomposition,
    cloud: int,
    eps: float = DEFAULT_EPS,
    cap: int = SUBSET_CAP,
) -> int | None:
    """Exact minimum number of stabs for one cloud, or None past the budget."""
    cands, masks = _cloud_candidates_masks(inst, dec, cloud, eps)
    cands, masks = _dedup_by_mask(cands, masks)
    full = 0
    for b in dec.blobs_in_cloud[cloud]:
        full |= 1 << b
    combo = _min_stab_subset(cands, masks, full, len(dec.blobs_in_cloud[cloud]), cap=cap)
    return None if combo is None else len(combo)


def _connected_components(nodes_xy: list[Point], eps: float) -> UnionFind:
    """Components of the unit-distance graph over the given points."""
    uf = UnionFind(len(nodes_xy))
    for i in range(len(nodes_xy)):
        for j in range(i + 1, len(nodes_xy)):
            if dist(nodes_xy[i], nodes_xy[j]) <= 1.0 + eps:
                uf.union(i, j)
    return uf


def stabs_to_hubs(
    inst: Instance,
    dec: Decomposition,
    cloud: int,
    stabs: StabSet,
    eps: float = DEFAULT_EPS,
) -> HubSet:
    """Turn a stabbing of a cloud into hubs that actually connect the cloud.

    While the sensors-plus-hubs graph (edges between any two devices within
    distance 1) has more than one sensor-bearing component, place a hub at the
    midpoint of the lexicographically first cross-component sensor pair at
    distance <= 2. Each new hub merges at least two components, so the result
    has at most 2|stabs| - 1 points.
    """
    members = dec.cloud_sensors[cloud]
    cloud_blobs = set(dec.blobs_in_cloud[cloud])
    stabbed = {b for s in stabs.covered for b in s if b in cloud_blobs}
    if stabbed != cloud_blobs:
        raise ValueError(
            f"stabs do not cover every blob of cloud {cloud}: "
            f"missing {sorted(cloud_blobs - stabbed)}"
        )
    hubs = list(stabs.points)
    while True:
        nodes = [inst.sensors[i] for i in members] + hubs
        uf = _connected_components(nodes, eps)
        sensor_comps = {uf.find(i) for i in range(len(members))}
        if len(sensor_comps) <= 1:
            break
        merged = False
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                if uf.find(a) == uf.find(b):
                    continue
                pa, pb = inst.sensors[members[a]], inst.sensors[members[b]]
                if dist(pa, pb) <= 2.0 + eps:
                    hubs.append(Point((pa.x + pb.x) / 2.0, (pa.y + pb.y) / 2.0))
                    merged = True
                    break
            if merged:
                break
        assert merged, "cloud invariant violated: no cross-component pair within 2"
    assert len(hubs) <= 2 * len(stabs.points) - 1
    return HubSet(points=hubs)


def stitch_cloud(
    inst: Instance, dec: Decomposition, cloud: int, eps: float = DEFAULT_EPS
) -> list[Point]:
    """Greedily connect a cloud's blobs directly, without a stab phase.

    Start from the blob with the smallest id. Each step places a relay at the
    candidate point that pierces the most blobs outside the connected set,
    among candidates touching the connected set; the relay's new blobs join
    the set. Terminates within (number of blobs in cloud) - 1 steps.
    """
    cloud_blobs = dec.blobs_in_cloud[cloud]
    if len(cloud_blobs) == 1:
        return []
    cands, masks = _cloud_candidates_masks(inst, dec, cloud, eps)
    full = 0
    for b in cloud_blobs:
        full |= 1 << b
    connected = 1 << cloud_blobs[0]
    relays: list[Point] = []
    while connected != full:
        best_i, best_gain = -1, 0
        for i, m in enumerate(masks):
            if m & connected == 0:
                continue
            gain = (m & full & ~connected).bit_count()
            if gain > best_gain:
                best_i, best_gain = i, gain
        assert best_gain > 0, "no candidate touches the connected set and a new blob"
        relays.append(cands[best_i])
        connected |= masks[best_i] & full
    assert len(relays) <= len(cloud_blobs) - 1
    return relays
