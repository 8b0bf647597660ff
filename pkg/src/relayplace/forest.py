"""Inter-cloud connectivity: spanning forests over disk regions and cluster merging.

Edge lengths between clouds are measured outside the unit-disk regions: the
gap between closest sensors minus the two unit radii.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .decomposition import Decomposition, Instance, UnionFind
from .geometry import DEFAULT_EPS, Point, candidate_points, dist, points_to_array

PAIR_SEARCH_CAP = 10**7


@dataclass(frozen=True)
class CloudGap:
    """Shortest connection between two clouds, measured outside the disks."""

    length: float
    endpoint_a: Point
    endpoint_b: Point
    sensor_a: int
    sensor_b: int


@dataclass(frozen=True)
class ForestEdge:
    from_id: int
    to_id: int
    endpoint_a: Point
    endpoint_b: Point
    length: float


@dataclass
class ForestPlan:
    """Chosen spanning edges with their in-region attachment endpoints."""

    edges: list[ForestEdge]

    @property
    def total_length(self) -> float:
        return sum(e.length for e in self.edges)


@dataclass
class ClusterState:
    """Clouds grouped into interconnected clusters, with the relays that did it."""

    cluster_of: dict[int, int]
    green_relays: list[Point] = field(default_factory=list)
    merges_performed: int = 0

    def clusters(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for cloud, cl in sorted(self.cluster_of.items()):
            groups.setdefault(cl, []).append(cloud)
        return [groups[k] for k in sorted(groups)]


def _closest_cross_pair(
    inst: Instance, dec: Decomposition, c1: int, c2: int
) -> tuple[int, int, float]:
    """Closest sensor pair across two clouds; ties broken by index pair."""
    ids1, ids2 = dec.cloud_sensors[c1], dec.cloud_sensors[c2]
    d = cdist(inst.xy[ids1], inst.xy[ids2])
    best = np.unravel_index(np.argmin(d), d.shape)
    return ids1[best[0]], ids2[best[1]], float(d[best])


def cloud_distance(inst: Instance, dec: Decomposition, c1: int, c2: int) -> CloudGap:
    """Gap between two clouds: closest-sensor distance minus 2, with the
    attachment points at distance exactly 1 from each closest sensor along
    the connecting segment."""
    if c1 == c2:
        raise ValueError(f"cloud_distance needs two distinct clouds, got {c1} twice")
    sa, sb, d = _closest_cross_pair(inst, dec, c1, c2)
    pa, pb = inst.sensors[sa], inst.sensors[sb]
    ux, uy = (pb.x - pa.x) / d, (pb.y - pa.y) / d
    return CloudGap(
        length=max(0.0, d - 2.0),
        endpoint_a=Point(pa.x + ux, pa.y + uy),
        endpoint_b=Point(pb.x - ux, pb.y - uy),
        sensor_a=sa,
        sensor_b=sb,
    )


def all_cloud_gaps(inst: Instance, dec: Decomposition) -> dict[tuple[int, int], CloudGap]:
    """CloudGap for every unordered cloud pair (keyed with c1 < c2)."""
    gaps = {}
    for c1 in range(dec.n_clouds):
        for c2 in range(c1 + 1, dec.n_clouds):
            gaps[(c1, c2)] = cloud_distance(inst, dec, c1, c2)
    return gaps


def _kruskal(n: int, weighted_edges: list[tuple[float, int, int]]) -> list[tuple[int, int]]:
    uf = UnionFind(n)
    chosen = []
    for _, a, b in sorted(weighted_edges):
        if uf.union(a, b):
            chosen.append((a, b))
    return chosen


def msfn(
    inst: Instance,
    dec: Decomposition,
    gaps: dict[tuple[int, int], CloudGap] | None = None,
) -> ForestPlan:
    """Minimum spanning tree over clouds under the outside-the-disks length."""
    if dec.n_clouds == 1:
        return ForestPlan(edges=[])
    if gaps is None:
        gaps = all_cloud_gaps(inst, dec)
    weighted = [(g.length, c1, c2) for (c1, c2), g in gaps.items()]
    edges = []
    for c1, c2 in _kruskal(dec.n_clouds, weighted):
        g = gaps[(min(c1, c2), max(c1, c2))]
        edges.append(
            ForestEdge(
                from_id=min(c1, c2),
                to_id=max(c1, c2),
                endpoint_a=g.endpoint_a,
                endpoint_b=g.endpoint_b,
                length=g.length,
            )
        )
    return ForestPlan(edges=edges)


def steinerize_raw(edge: ForestEdge, r: float, eps: float = DEFAULT_EPS) -> list[Point]:
    """Relays at both endpoints plus one every r units from endpoint_a, no dedup.

    The list always has exactly 2 + floor(length/r) entries; when the length is
    a multiple of r the last interior relay coincides with endpoint_b.
    """
    if r < 1:
        raise ValueError("relay range must be >= 1")
    a, b = edge.endpoint_a, edge.endpoint_b
    length = edge.length
    pts = [a]
    if length > eps:
        ux, uy = (b.x - a.x) / length, (b.y - a.y) / length
        for k in range(1, math.floor(length / r) + 1):
            pts.append(Point(a.x + ux * k * r, a.y + uy * k * r))
    pts.append(b)
    return pts


def steinerize(edge: ForestEdge, r: float, eps: float = DEFAULT_EPS) -> list[Point]:
    """Like steinerize_raw but with coincident points (within eps) deduplicated.

    Consecutive relay gaps along the edge never exceed r.
    """
    out: list[Point] = []
    for p in steinerize_raw(edge, r, eps=eps):
        if not any(dist(p, q) <= eps for q in out):
            out.append(p)
    return out


def _attach_point_towards(sensor: Point, target: Point, eps: float) -> Point:
    """Point at distance 1 from the sensor in the direction of target (or the
    target itself when it already lies inside the sensor's unit disk)."""
    d = dist(sensor, target)
    if d <= 1.0 + eps:
        return target
    ux, uy = (target.x - sensor.x) / d, (target.y - sensor.y) / d
    return Point(sensor.x + ux, sensor.y + uy)


def merge_clusters_green(
    inst: Instance,
    dec: Decomposition,
    r: float | None = None,
    eps: float = DEFAULT_EPS,
    gaps: dict[tuple[int, int], CloudGap] | None = None,
    pair_cap: int = PAIR_SEARCH_CAP,
) -> ClusterState:
    """Greedily interconnect clouds into clusters with green relays.

    Phase 1 merges two clusters with 2 relays whenever clouds from distinct
    clusters have sensors within r + 2 (the relays sit at the in-cloud gap
    endpoints, at distance <= r from each other). Phase 2 then merges 3
    clusters with 4 relays around a point z whose disk of radius r reaches
    into three clusters' clouds, and phase 3 merges 4 clusters with 6 relays
    around a pair z1, z2 within r of each other. Every merge spends at most
    2 relays per drop in cluster count, so the total stays under 2*(clouds)-2.
    """
    if r is None:
        r = inst.r
    if gaps is None:
        gaps = all_cloud_gaps(inst, dec)
    state = ClusterState(cluster_of={c: c for c in range(dec.n_clouds)})

    def sensor_gap(c1: int, c2: int) -> float:
        return gaps[(min(c1, c2), max(c1, c2))].length + 2.0

    # phase 1: closest mergeable cloud pair first, until exhausted
    while True:
        best = None
        for (c1, c2), g in gaps.items():
            if state.cluster_of[c1] == state.cluster_of[c2]:
                continue
            d = g.length + 2.0
            if d <= r + 2.0 + eps and (best is None or (d, c1, c2) < best):
                best = (d, c1, c2)
        if best is None:
            break
        _, c1, c2 = best
        g = gaps[(c1, c2)]
        state.green_relays.extend([g.endpoint_a, g.endpoint_b])
        _relabel(state, state.cluster_of[c2], state.cluster_of[c1])
        state.merges_performed += 1

    _merge_multiway(inst, dec, state, r, eps, sensor_gap, arity=3, pair_cap=pair_cap)
    _merge_multiway(inst, dec, state, r, eps, sensor_gap, arity=4, pair_cap=pair_cap)
    assert len(state.green_relays) <= 2 * state.merges_performed
    return state


def _relabel(state: ClusterState, old: int, new: int) -> None:
    for c, cl in state.cluster_of.items():
        if cl == old:
            state.cluster_of[c] = new


def _cluster_sensor_ids(dec: Decomposition, state: ClusterState, cluster: int) -> list[int]:
    out = []
    for cloud, cl in state.cluster_of.items():
        if cl == cluster:
            out.extend(dec.cloud_sensors[cloud])
    return out


def _merge_multiway(
    inst: Instance,
    dec: Decomposition,
    state: ClusterState,
    r: float,
    eps: float,
    sensor_gap,
    arity: int,
    pair_cap: int,
) -> None:
    """Find a relay hub point (phase 2) or pair (phase 3) joining `arity` clusters.

    A cluster is reachable from a point z when some sensor of it lies within
    r + 1 of z: a relay placed 1 unit inside the cloud towards z then sits
    within r of z. Candidate z points are arrangement points of radius-(r+1)
    disks around the sensors near a prefiltered cluster group.
    """
    # necessary condition on pairwise sensor gaps for clusters joined via z (or z1-z2)
    reach = 2.0 * (r + 1.0) if arity == 3 else 2.0 * (r + 1.0) + r
    progress = True
    while progress:
        progress = False
        clusters = sorted(set(state.cluster_of.values()))
        if len(clusters) < arity:
            return
        close: dict[int, set[int]] = {cl: set() for cl in clusters}
        for i, c1 in enumerate(clusters):
            for c2 in clusters[i + 1 :]:
                dmin = min(
                    sensor_gap(a, b)
                    for a, cla in state.cluster_of.items()
                    if cla == c1
                    for b, clb in state.cluster_of.items()
                    if clb == c2
                )
                if dmin <= reach + eps:
                    close[c1].add(c2)
                    close[c2].add(c1)
        groups = [
            combo
            for combo in itertools.combinations(clusters, arity)
            if all(b in close[a] for ai, a in enumerate(combo) for b in combo[ai + 1 :])
        ]
        for combo in groups:
            found = _try_join(inst, dec, state, combo, r, eps, pair_cap)
            if found:
                progress = True
                break


def _try_join(
    inst: Instance,
    dec: Decomposition,
    state: ClusterState,
    combo: tuple[int, ...],
    r: float,
    eps: float,
    pair_cap: int,
) -> bool:
    sensor_ids = []
    for cl in combo:
        sensor_ids.extend(_cluster_sensor_ids(dec, state, cl))
    sensors = [inst.sensors[i] for i in sensor_ids]
    cands = sorted(candidate_points(sensors, r + 1.0, eps=eps), key=lambda p: (p.x, p.y))
    d = cdist(points_to_array(cands), points_to_array(sensors))
    reach = d <= r + 1.0 + eps
    clusters_of_cols = np.array([state.cluster_of[dec.cloud_of[i]] for i in sensor_ids])

    def reachable_clusters(row: np.ndarray) -> set[int]:
        return set(clusters_of_cols[row].tolist())

    if len(combo) == 3:
        for i, c in enumerate(cands):
            seen = reachable_clusters(reach[i])
            if all(cl in seen for cl in combo):
                _place_join(inst, dec, state, combo, [c], sensor_ids, d[i], reach[i], eps)
                return True
        return False

    # arity 4: a pair z1, z2 within r, covering all four clusters between them
    if len(cands) * len(cands) > pair_cap:
        return False
    cand_d = cdist(points_to_array(cands), points_to_array(cands))
    for i in range(len(cands)):
        seen_i = reachable_clusters(reach[i])
        for j in range(i + 1, len(cands)):
            if cand_d[i, j] > r + eps:
                continue
            if all(cl in seen_i | reachable_clusters(reach[j]) for cl in combo):
                _place_join(
                    inst, dec, state, combo, [cands[i], cands[j]], sensor_ids,
                    np.minimum(d[i], d[j]), reach[i] | reach[j], eps,
                )
                return True
    return False


def _place_join(
    inst: Instance,
    dec: Decomposition,
    state: ClusterState,
    combo: tuple[int, ...],
    hub_points: list[Point],
    sensor_ids: list[int],
    dists_to_hub: np.ndarray,
    reach_row: np.ndarray,
    eps: float,
) -> None:
    greens = list(hub_points)
    for cl in combo:
        best_si, best_d = None, math.inf
        for col, si in enumerate(sensor_ids):
            if not reach_row[col]:
                continue
            if state.cluster_of[dec.cloud_of[si]] != cl:
                continue
            if dists_to_hub[col] < best_d:
                best_si, best_d = si, float(dists_to_hub[col])
        assert best_si is not None
        sensor = inst.sensors[best_si]
        hub = min(hub_points, key=lambda h: dist(sensor, h))
        attach = _attach_point_towards(sensor, hub, eps)
        if all(dist(attach, g) > eps for g in greens):
            greens.append(attach)
    state.green_relays.extend(greens)
    target = min(combo)
    for cl in combo:
        _relabel(state, cl, target)
    state.merges_performed += len(combo) - 1


def cluster_gaps(
    inst: Instance,
    dec: Decomposition,
    state: ClusterState,
    gaps: dict[tuple[int, int], CloudGap] | None = None,
) -> dict[tuple[int, int], CloudGap]:
    """Shortest cloud gap for every cluster pair (keyed by cluster ids, a < b)."""
    if gaps is None:
        gaps = all_cloud_gaps(inst, dec)
    best: dict[tuple[int, int], CloudGap] = {}
    for (c1, c2), g in sorted(gaps.items()):
        k1, k2 = state.cluster_of[c1], state.cluster_of[c2]
        if k1 == k2:
            continue
        key = (min(k1, k2), max(k1, k2))
        if key not in best or g.length < best[key].length:
            best[key] = g
    return best


def msfn_prime(
    inst: Instance,
    dec: Decomposition,
    state: ClusterState,
    r: float | None = None,
    gaps: dict[tuple[int, int], CloudGap] | None = None,
) -> ForestPlan:
    """Spanning tree over clusters minimizing relay count, not length.

    Edge weight is 2 + floor(length/r): two endpoint relays plus the interior
    chain. Edge lengths come from the closest cloud pair across each cluster
    pair.
    """
    if r is None:
        r = inst.r
    pair_best = cluster_gaps(inst, dec, state, gaps)
    clusters = sorted(set(state.cluster_of.values()))
    if len(clusters) <= 1:
        return ForestPlan(edges=[])
    index = {cl: i for i, cl in enumerate(clusters)}
    weighted = [
        (2 + math.floor(g.length / r), a, b) for (a, b), g in sorted(pair_best.items())
    ]
    weighted = [(w, index[a], index[b]) for w, a, b in weighted]
    chosen = _kruskal(len(clusters), weighted)
    edges = []
    for ia, ib in chosen:
        a, b = clusters[ia], clusters[ib]
        g = pair_best[(min(a, b), max(a, b))]
        edges.append(
            ForestEdge(
                from_id=min(a, b),
                to_id=max(a, b),
                endpoint_a=g.endpoint_a,
                endpoint_b=g.endpoint_b,
                length=g.length,
            )
        )
    return ForestPlan(edges=edges)
