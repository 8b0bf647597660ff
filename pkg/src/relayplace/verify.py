"""Feasibility checking, per-instance lower bounds, and a tiny-instance oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .decomposition import Instance, UnionFind, build_decomposition
from .forest import msfn
from .geometry import DEFAULT_EPS, Point, candidate_points, dedup_points, points_to_array
from .placement import min_stab_count, greedy_stabs
from .solvers import EXPANSION_LIMIT, PlacedRelay, RelaySet

STEINER_RATIO = math.sqrt(3.0) / 2.0  # spanning-to-Steiner length factor
GREEDY_COVER_RATIO = 137.0 / 60.0  # 1 + 1/2 + 1/3 + 1/4 + 1/5
_CEIL_SLACK = 1e-9  # keeps ceil() honest against float noise in derived bounds


def _connectivity(
    inst: Instance,
    relay_pts: list[Point],
    r: float,
    sensor_links: bool,
    eps: float,
) -> UnionFind:
    """Union-find over [sensors..., relays...] under the communication rules."""
    n = inst.n
    m = len(relay_pts)
    uf = UnionFind(n + m)
    sensor_tree = cKDTree(inst.xy)
    if sensor_links and n > 1:
        for i, j in sensor_tree.query_pairs(1.0 + eps):
            uf.union(i, j)
    if m:
        relay_arr = points_to_array(relay_pts)
        relay_tree = cKDTree(relay_arr)
        if m > 1:
            for i, j in relay_tree.query_pairs(r + eps):
                uf.union(n + i, n + j)
        for si, hits in enumerate(sensor_tree.query_ball_tree(relay_tree, 1.0 + eps)):
            for ri in hits:
                uf.union(si, n + ri)
    return uf


def _expanded(relays: RelaySet, limit: int, eps: float) -> list[Point]:
    return relays.expand(limit=limit, eps=eps)


def check_one_tier(
    inst: Instance,
    relays: RelaySet,
    eps: float = DEFAULT_EPS,
    limit: int = EXPANSION_LIMIT,
) -> bool:
    """All sensors in one component of the graph with sensor-sensor links <= 1,
    sensor-relay links <= 1, and relay-relay links <= r."""
    pts = _expanded(relays, limit, eps)
    uf = _connectivity(inst, pts, inst.r, sensor_links=True, eps=eps)
    root = uf.find(0)
    return all(uf.find(i) == root for i in range(1, inst.n))


def check_two_tier(
    inst: Instance,
    relays: RelaySet,
    eps: float = DEFAULT_EPS,
    limit: int = EXPANSION_LIMIT,
) -> bool:
    """Like check_one_tier but without sensor-sensor links, and additionally
    every sensor must have a relay within distance 1."""
    pts = _expanded(relays, limit, eps)
    if not pts:
        return False
    relay_tree = cKDTree(points_to_array(pts))
    covered = relay_tree.query_ball_point(inst.xy, 1.0 + eps)
    if any(len(h) == 0 for h in covered):
        return False
    uf = _connectivity(inst, pts, inst.r, sensor_links=False, eps=eps)
    root = uf.find(0)
    return all(uf.find(i) == root for i in range(1, inst.n))


def first_disconnected_pair(
    inst: Instance,
    relays: RelaySet,
    tier: str,
    eps: float = DEFAULT_EPS,
    limit: int = EXPANSION_LIMIT,
) -> tuple[int, int] | None:
    """Lowest-index sensor pair left in different components, if any."""
    pts = _expanded(relays, limit, eps)
    uf = _connectivity(inst, pts, inst.r, sensor_links=(tier == "one"), eps=eps)
    root = uf.find(0)
    for i in range(1, inst.n):
        if uf.find(i) != root:
            return (0, i)
    if tier == "two":
        if not pts:
            return (0, 0) if inst.n == 1 else (0, 1)
        relay_tree = cKDTree(points_to_array(pts))
        for si, hits in enumerate(relay_tree.query_ball_point(inst.xy, 1.0 + eps)):
            if len(hits) == 0:
                return (si, si)
    return None


@dataclass(frozen=True)
class BoundsReport:
    """The three per-instance relay lower bounds and their maximum.

    lb_forest converts the spanning-forest length over clouds into relays via
    the Steiner ratio (the Steiner forest is at least sqrt(3)/2 of the spanning
    forest, and each relay edge covers at most r of it). lb_stab is the
    minimum number of points piercing every blob, exact when the subset
    enumeration fits the budget and otherwise the greedy count scaled down by
    60/137. lb_clouds counts the clouds: one relay is needed in each.
    """

    lb_forest: int
    lb_stab: int
    lb_clouds: int
    max_lower_bound: int
    stab_mode: str  # "exact" | "greedy-derived"


def lower_bounds(
    inst: Instance, exact_stab_limit: int = 10**6, eps: float = DEFAULT_EPS
) -> BoundsReport:
    dec = build_decomposition(inst, eps=eps)
    if dec.n_blobs == 1:
        return BoundsReport(0, 0, 0, 0, "exact")

    plan = msfn(inst, dec)
    lb_forest = math.ceil(STEINER_RATIO * plan.total_length / inst.r - _CEIL_SLACK)

    per_cloud = []
    mode = "exact"
    for cloud in range(dec.n_clouds):
        cnt = min_stab_count(inst, dec, cloud, eps=eps, cap=exact_stab_limit)
        if cnt is None:
            mode = "greedy-derived"
            break
        per_cloud.append(cnt)
    if mode == "exact":
        lb_stab = sum(per_cloud)
    else:
        greedy = len(greedy_stabs(inst, dec, eps=eps).points)
        lb_stab = math.ceil(greedy / GREEDY_COVER_RATIO - _CEIL_SLACK)

    lb_clouds = dec.n_clouds if dec.n_clouds > 1 else 0
    return BoundsReport(
        lb_forest=lb_forest,
        lb_stab=lb_stab,
        lb_clouds=lb_clouds,
        max_lower_bound=max(lb_forest, lb_stab, lb_clouds),
        stab_mode=mode,
    )


GRID_CAP = 10**4
ORACLE_SUBSET_CAP = 10**7


def _oracle_candidates(inst: Instance, eps: float) -> list[Point]:
    """Arrangement points at radii 1 and r, the sensors, and a coarse grid over
    the bounding box inflated by r (grid coarsened to stay under GRID_CAP)."""
    pts = list(candidate_points(inst.sensors, 1.0, eps=eps))
    pts += candidate_points(inst.sensors, inst.r, eps=eps)
    pts += inst.sensors
    xmin, ymin = inst.xy.min(axis=0)
    xmax, ymax = inst.xy.max(axis=0)
    xmin, ymin, xmax, ymax = xmin - inst.r, ymin - inst.r, xmax + inst.r, ymax + inst.r
    spacing = 0.25
    while ((xmax - xmin) / spacing + 1) * ((ymax - ymin) / spacing + 1) > GRID_CAP:
        spacing *= 2.0
    nx = int(math.floor((xmax - xmin) / spacing)) + 1
    ny = int(math.floor((ymax - ymin) / spacing)) + 1
    for i in range(nx):
        for j in range(ny):
            pts.append(Point(xmin + i * spacing, ymin + j * spacing))
    return sorted(dedup_points(pts, eps=eps), key=lambda p: (p.x, p.y))


class _SubsetChecker:
    """Exact feasibility of small relay subsets from precomputed incidences.

    Candidates split into "touching" points (within 1 of some sensor: they can
    stab blobs / cover sensors) and "bridge" points (they only ever contribute
    relay-relay links). Feasibility of a subset reduces to connectivity over
    coverage units (blobs for one tier, sensors for two) plus the chosen
    relays, with relays linked when within r and relays tied to every unit
    they cover.
    """

    def __init__(self, inst: Instance, cands: list[Point], tier: str, eps: float):
        self.inst = inst
        self.cands = cands
        dec = build_decomposition(inst, eps=eps)
        arr = points_to_array(cands)
        sensor_tree = cKDTree(inst.xy)
        cand_tree = cKDTree(arr)
        hits = cand_tree.query_ball_tree(sensor_tree, 1.0 + eps)
        self.masks: list[int] = []
        for h in hits:
            m = 0
            for si in h:
                m |= 1 << (dec.blob_of[si] if tier == "one" else si)
            self.masks.append(m)
        self.n_units = dec.n_blobs if tier == "one" else inst.n
        self.full = (1 << self.n_units) - 1
        # dense relay-relay link matrix, built blockwise to bound peak memory
        n = len(cands)
        self.link = np.zeros((n, n), dtype=bool)
        step = 512
        for lo in range(0, n, step):
            hi = min(lo + step, n)
            d = np.sqrt(((arr[lo:hi, None, :] - arr[None, :, :]) ** 2).sum(-1))
            self.link[lo:hi] = d <= inst.r + eps
        self.touching = [i for i, m in enumerate(self.masks) if m]
        self.bridges = np.array(
            [i for i, m in enumerate(self.masks) if not m], dtype=int
        )
        # reach[t]: which bridge slots are within r of touching candidate t
        self.reach = {
            t: self.link[t, self.bridges] if len(self.bridges) else np.zeros(0, bool)
            for t in self.touching
        }
        self._bridge_link = None
        self._reach2: dict[int, np.ndarray] = {}

    def bridge_link(self) -> np.ndarray:
        """Bridge-to-bridge link matrix with the diagonal cleared."""
        if self._bridge_link is None:
            b = self.link[np.ix_(self.bridges, self.bridges)].copy()
            np.fill_diagonal(b, False)
            self._bridge_link = b
        return self._bridge_link

    def reach2(self, t: int) -> np.ndarray:
        """Bridge slots reachable from touching candidate t via one other bridge."""
        if t not in self._reach2:
            b = self.bridge_link()
            self._reach2[t] = (self.reach[t].astype(np.float32) @ b) > 0
        return self._reach2[t]

    def covering(self, combo: tuple[int, ...]) -> bool:
        m = 0
        for i in combo:
            m |= self.masks[i]
        return m == self.full

    def feasible(self, subset: tuple[int, ...]) -> bool:
        if not self.covering(subset):
            return False
        k = len(subset)
        uf = UnionFind(self.n_units + k)
        for a in range(k):
            for b in range(a + 1, k):
                if self.link[subset[a], subset[b]]:
                    uf.union(self.n_units + a, self.n_units + b)
            m = self.masks[subset[a]]
            for u in range(self.n_units):
                if m >> u & 1:
                    uf.union(u, self.n_units + a)
        root = uf.find(0)
        return all(uf.find(u) == root for u in range(1, self.n_units))

    def relay_components(self, combo: tuple[int, ...]) -> list[list[int]]:
        """Group the touching relays of combo by shared units or direct links."""
        k = len(combo)
        uf = UnionFind(k)
        for a in range(k):
            for b in range(a + 1, k):
                if self.link[combo[a], combo[b]] or (self.masks[combo[a]] & self.masks[combo[b]]):
                    uf.union(a, b)
        groups: dict[int, list[int]] = {}
        for a in range(k):
            groups.setdefault(uf.find(a), []).append(combo[a])
        return list(groups.values())

    def one_bridge_for(self, combo: tuple[int, ...]) -> int | None:
        """A bridge reaching every relay component of combo, if one exists."""
        comps = self.relay_components(combo)
        if len(comps) <= 1 or not len(self.bridges):
            return None
        ok = np.ones(len(self.bridges), dtype=bool)
        for comp in comps:
            comp_reach = np.zeros(len(self.bridges), dtype=bool)
            for t in comp:
                comp_reach |= self.reach[t]
            ok &= comp_reach
        idx = np.flatnonzero(ok)
        return int(self.bridges[idx[0]]) if len(idx) else None

    def two_bridge_chain_for(self, a: int, b: int) -> tuple[int, int] | None:
        """Bridges z1, z2 with a-z1, z1-z2, z2-b links, if such a chain exists."""
        if not len(self.bridges):
            return None
        if not (self.reach2(a) & self.reach[b]).any():
            return None
        blink = self.bridge_link()
        for i in np.flatnonzero(self.reach[a]):
            hits = np.flatnonzero(blink[i] & self.reach[b])
            if len(hits):
                return int(self.bridges[i]), int(self.bridges[hits[0]])
        return None


def optimum_bruteforce(
    inst: Instance,
    max_relays: int,
    tier: str,
    eps: float = DEFAULT_EPS,
    cap: int = ORACLE_SUBSET_CAP,
) -> RelaySet | None:
    """Smallest feasible relay subset from a rich finite candidate set.

    Candidate-restricted: the answer upper-bounds the continuous optimum, and
    together with lower_bounds it sandwiches it. Only subsets up to max_relays
    (at most 4) are tried; None means nothing that small was found or the
    enumeration exceeded its budget.

    Coverage (stabbing every blob / covering every sensor) can only come from
    candidates within 1 of a sensor, so subsets are enumerated as a covering
    part from those plus up to two bridge points. A bridge next to a single
    covering relay is never needed (a solo coverer is feasible by itself), and
    at most two bridges can matter within the size-4 budget, so this
    enumeration is exhaustive over the candidate set.
    """
    if max_relays > 4:
        raise ValueError("max_relays must be at most 4")
    if tier not in ("one", "two"):
        raise ValueError(f"tier must be 'one' or 'two', got {tier!r}")
    checker_fn = check_one_tier if tier == "one" else check_two_tier
    empty = RelaySet()
    if checker_fn(inst, empty, eps=eps):
        return empty

    cands = _oracle_candidates(inst, eps)
    chk = _SubsetChecker(inst, cands, tier, eps)
    touching = chk.touching

    def result(subset: tuple[int, ...]) -> RelaySet:
        assert chk.feasible(subset)
        rs = RelaySet(points=[PlacedRelay(cands[i], "plain") for i in subset])
        assert checker_fn(inst, rs, eps=eps)
        return rs

    work = cap
    for size in range(1, max_relays + 1):
        for n_bridge in range(0, min(2, size - 1) + 1):
            n_touch = size - n_bridge
            if n_bridge > 0 and n_touch < 2:
                continue  # a solo coverer never needs bridges
            if math.comb(len(touching), n_touch) > work:
                return None
            for tc in itertools.combinations(touching, n_touch):
                work -= 1
                if work <= 0:
                    return None
                if not chk.covering(tc):
                    continue
                if n_bridge == 0:
                    if chk.feasible(tc):
                        return result(tc)
                elif n_bridge == 1:
                    z = chk.one_bridge_for(tc)
                    if z is not None:
                        return result(tc + (z,))
                else:  # n_bridge == 2, necessarily n_touch == 2
                    a, b = tc
                    if len(chk.relay_components(tc)) == 2:
                        zz = chk.two_bridge_chain_for(a, b)
                        if zz is not None:
                            return result(tc + zz)
    return None
