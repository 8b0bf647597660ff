"""End-to-end relay placement algorithms for both communication models.

One-tier solvers (sensors may talk to sensors within 1):
  * solve_one_tier_simple  — greedy stabs per blob, hub conversion per cloud,
    then a Steinerized spanning forest over clouds.
  * solve_one_tier_greedy  — exact stabbings for cheaply-stabbable clouds,
    greedy stitching for the rest, green cluster merging, then a relay-count
    weighted spanning forest.

Two-tier solvers (sensor-to-sensor links forbidden):
  * solve_two_tier_sparse  — grid rounding plus a spanning tree of relay
    chains; only valid on sparse instances (diameter large versus n*r).
  * solve_two_tier_cover_connect — greedy unit-disk cover of the sensors,
    then a Steinerized spanning tree over the cover relays.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import cdist

from .decomposition import Decomposition, Instance, UnionFind, build_decomposition
from .forest import (
    ForestEdge,
    all_cloud_gaps,
    merge_clusters_green,
    msfn,
    msfn_prime,
    steinerize,
    steinerize_raw,
)
from .geometry import DEFAULT_EPS, Point, candidate_points, coverage_sets, dedup_points, dist
from .placement import StabSet, exact_stabs, greedy_stabs, stabs_to_hubs, stitch_cloud

EXPANSION_LIMIT = 10**7

COLORS = ("red", "green", "yellow", "plain")


class ExpansionLimitError(RuntimeError):
    def __init__(self, count: int, limit: int):
        super().__init__(f"relay expansion would produce {count} points (limit {limit})")
        self.count = count
        self.limit = limit


class DenseInstanceError(ValueError):
    """Raised when the sparse-instance solver is given a dense instance."""


@dataclass(frozen=True)
class PlacedRelay:
    point: Point
    color: str = "plain"


@dataclass(frozen=True)
class RelayChain:
    """A run of relays: at a, at b, and every `spacing` units starting from a."""

    a: Point
    b: Point
    spacing: float

    @property
    def length(self) -> float:
        return dist(self.a, self.b)

    def count_raw(self) -> int:
        return 2 + math.floor(self.length / self.spacing)


@dataclass
class RelaySet:
    """Succinct solution: explicit colored points plus equally-spaced chains."""

    points: list[PlacedRelay] = field(default_factory=list)
    chains: list[RelayChain] = field(default_factory=list)

    def count_raw(self) -> int:
        """Cardinality before deduplication, computable without expansion."""
        return len(self.points) + sum(c.count_raw() for c in self.chains)

    def expand(self, limit: int = EXPANSION_LIMIT, eps: float = DEFAULT_EPS) -> list[Point]:
        """Explicit deduplicated relay positions."""
        raw = self.count_raw()
        if raw > limit:
            raise ExpansionLimitError(raw, limit)
        pts = [pr.point for pr in self.points]
        for c in self.chains:
            length = c.length
            pts.append(c.a)
            if length > eps:
                ux, uy = (c.b.x - c.a.x) / length, (c.b.y - c.a.y) / length
                for k in range(1, math.floor(length / c.spacing) + 1):
                    pts.append(Point(c.a.x + ux * k * c.spacing, c.a.y + uy * k * c.spacing))
            pts.append(c.b)
        return dedup_points(pts, eps=eps)


@dataclass(frozen=True)
class Certificate:
    """One named inequality checked during the run (lhs <= rhs)."""

    name: str
    lhs: float
    rhs: float
    holds: bool


@dataclass
class CloudStats:
    cloud: int
    blobs: int
    mode: str  # "exact" | "stitched" | "hubbed"
    stabs: int | None
    reds: int


@dataclass
class SolveReport:
    algorithm: str
    n_sensors: int
    r: float
    n_blobs: int
    n_clouds: int
    relay_count: int
    pre_dedup_count: int
    points_by_color: dict[str, int]
    chain_count: int
    stab_count: int | None = None
    red_count: int = 0
    green_count: int = 0
    yellow_count: int = 0
    forest_formula_count: int | None = None
    forest_raw_count: int | None = None
    certificates: list[Certificate] = field(default_factory=list)
    per_cloud: list[CloudStats] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    wall_time_s: float | None = None

    def all_hold(self) -> bool:
        return all(c.holds for c in self.certificates)

    def to_dict(self, volatile: bool = True) -> dict:
        d = asdict(self)
        if not volatile:
            d["wall_time_s"] = None
        return d


def _cert(name: str, lhs: float, rhs: float) -> Certificate:
    return Certificate(name=name, lhs=lhs, rhs=rhs, holds=lhs <= rhs)


def _dedup_placed(placed: list[PlacedRelay], eps: float) -> list[PlacedRelay]:
    """Drop relays whose point coincides with an earlier one (first color wins)."""
    out: list[PlacedRelay] = []
    for pr in placed:
        if not any(dist(pr.point, q.point) <= eps for q in out):
            out.append(pr)
    return out


def _finish(
    relays: RelaySet, report: SolveReport, t0: float, eps: float
) -> tuple[RelaySet, SolveReport]:
    by_color = {c: 0 for c in COLORS}
    for pr in relays.points:
        by_color[pr.color] += 1
    report.points_by_color = by_color
    report.chain_count = len(relays.chains)
    report.pre_dedup_count = relays.count_raw()
    report.relay_count = len(relays.expand(eps=eps))
    report.red_count = by_color["red"]
    report.green_count = by_color["green"]
    report.yellow_count = by_color["yellow"]
    report.wall_time_s = time.perf_counter() - t0
    return relays, report


def _empty_report(algorithm: str, inst: Instance, dec: Decomposition, params: dict) -> SolveReport:
    return SolveReport(
        algorithm=algorithm,
        n_sensors=inst.n,
        r=inst.r,
        n_blobs=dec.n_blobs,
        n_clouds=dec.n_clouds,
        relay_count=0,
        pre_dedup_count=0,
        points_by_color={c: 0 for c in COLORS},
        chain_count=0,
        params=params,
    )


def _split_stabs_by_cloud(dec: Decomposition, stabs) -> dict[int, list[int]]:
    """Indices of stab points per cloud (a stab never pierces two clouds)."""
    per_cloud: dict[int, list[int]] = {}
    for i, blobs in enumerate(stabs.covered):
        clouds = {dec.cloud_of_blob[b] for b in blobs}
        assert len(clouds) == 1, "a unit-radius stab cannot pierce two clouds"
        per_cloud.setdefault(clouds.pop(), []).append(i)
    return per_cloud


def solve_one_tier_simple(
    inst: Instance, eps: float = DEFAULT_EPS
) -> tuple[RelaySet, SolveReport]:
    """Greedy stab cover, hub conversion per cloud, Steinerized spanning forest.

    Single-blob instances need no relays at all and return an empty solution.
    """
    t0 = time.perf_counter()
    dec = build_decomposition(inst, eps=eps)
    report = _empty_report("one-tier-simple", inst, dec, params={"eps": eps})
    if dec.n_blobs == 1:
        return _finish(RelaySet(), report, t0, eps)

    stabs = greedy_stabs(inst, dec, eps=eps)
    report.stab_count = len(stabs.points)
    placed: list[PlacedRelay] = []
    for cloud, idxs in sorted(_split_stabs_by_cloud(dec, stabs).items()):
        cloud_stabs = StabSet(
            points=[stabs.points[i] for i in idxs],
            covered=[stabs.covered[i] for i in idxs],
        )
        hubs = stabs_to_hubs(inst, dec, cloud, cloud_stabs, eps=eps)
        placed.extend(PlacedRelay(p, "red") for p in hubs.points)
        report.per_cloud.append(
            CloudStats(
                cloud=cloud,
                blobs=len(dec.blobs_in_cloud[cloud]),
                mode="hubbed",
                stabs=len(cloud_stabs.points),
                reds=len(hubs.points),
            )
        )
        report.certificates.append(
            _cert(f"lemma_hubs_cloud_{cloud}", len(hubs.points), 2 * len(cloud_stabs.points) - 1)
        )

    plan = msfn(inst, dec)
    forest_raw = 0
    for e in plan.edges:
        raw_pts = steinerize_raw(e, inst.r, eps=eps)
        forest_raw += len(raw_pts)
        deduped = steinerize(e, inst.r, eps=eps)
        placed.append(PlacedRelay(deduped[0], "green"))
        for p in deduped[1:-1]:
            placed.append(PlacedRelay(p, "yellow"))
        if len(deduped) > 1:
            placed.append(PlacedRelay(deduped[-1], "green"))
    formula = 2 * (dec.n_clouds - 1) + sum(math.floor(e.length / inst.r) for e in plan.edges)
    report.forest_formula_count = formula
    report.forest_raw_count = forest_raw
    report.certificates.append(_cert("forest_count_formula", forest_raw, formula))
    report.certificates.append(_cert("forest_count_formula_lb", formula, forest_raw))

    relays = RelaySet(points=_dedup_placed(placed, eps))
    return _finish(relays, report, t0, eps)


def solve_one_tier_greedy(
    inst: Instance, k: int = 3, eps: float = DEFAULT_EPS
) -> tuple[RelaySet, SolveReport]:
    """Exact stabbings where cheap, greedy stitching elsewhere, then green
    cluster merging and a relay-count weighted spanning forest.

    k controls how far the per-cloud exact stabbing search goes: clouds
    stabbable with fewer than k points get the optimal stabbing plus hub
    conversion (at most 2i-1 red relays); the rest are stitched greedily
    (at most blobs-1 red relays).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    t0 = time.perf_counter()
    dec = build_decomposition(inst, eps=eps)
    report = _empty_report("one-tier-greedy", inst, dec, params={"k": k, "eps": eps})
    if dec.n_blobs == 1:
        return _finish(RelaySet(), report, t0, eps)

    placed: list[PlacedRelay] = []
    for cloud in range(dec.n_clouds):
        n_blobs_c = len(dec.blobs_in_cloud[cloud])
        es = exact_stabs(inst, dec, cloud, k, eps=eps)
        if es is not None:
            hubs = stabs_to_hubs(inst, dec, cloud, es, eps=eps)
            placed.extend(PlacedRelay(p, "red") for p in hubs.points)
            report.per_cloud.append(
                CloudStats(cloud=cloud, blobs=n_blobs_c, mode="exact",
                           stabs=len(es.points), reds=len(hubs.points))
            )
            report.certificates.append(
                _cert(f"exact_cloud_{cloud}_reds", len(hubs.points), 2 * len(es.points) - 1)
            )
        else:
            reds = stitch_cloud(inst, dec, cloud, eps=eps)
            placed.extend(PlacedRelay(p, "red") for p in reds)
            report.per_cloud.append(
                CloudStats(cloud=cloud, blobs=n_blobs_c, mode="stitched",
                           stabs=None, reds=len(reds))
            )
            report.certificates.append(
                _cert(f"stitch_cloud_{cloud}_reds", len(reds), n_blobs_c - 1)
            )

    gaps = all_cloud_gaps(inst, dec)
    state = merge_clusters_green(inst, dec, r=inst.r, eps=eps, gaps=gaps)
    placed.extend(PlacedRelay(p, "green") for p in state.green_relays)

    plan = msfn_prime(inst, dec, state, r=inst.r, gaps=gaps)
    n_green_endpoints = 0
    for e in plan.edges:
        deduped = steinerize(e, inst.r, eps=eps)
        placed.append(PlacedRelay(deduped[0], "green"))
        n_green_endpoints += 1
        for p in deduped[1:-1]:
            placed.append(PlacedRelay(p, "yellow"))
        if len(deduped) > 1:
            placed.append(PlacedRelay(deduped[-1], "green"))
            n_green_endpoints += 1

    total_green = len(state.green_relays) + n_green_endpoints
    report.certificates.append(
        _cert("green_total", total_green, max(0, 2 * dec.n_clouds - 2))
    )
    relays = RelaySet(points=_dedup_placed(placed, eps))
    return _finish(relays, report, t0, eps)


@dataclass(frozen=True)
class SparsityCheck:
    sparse: bool
    D: float
    threshold: float


def _diameter(inst: Instance) -> float:
    xy = inst.xy
    if inst.n == 1:
        return 0.0
    pts = xy
    if inst.n > 1000:
        uniq = np.unique(xy, axis=0)
        if len(uniq) >= 3:
            try:
                pts = uniq[ConvexHull(uniq).vertices]
            except Exception:
                pts = uniq  # degenerate (collinear) hulls fall back to all points
        else:
            pts = uniq
    d = cdist(pts, pts)
    return float(d.max())


def is_sparse(inst: Instance, m: int) -> SparsityCheck:
    """Sparsity test: D = diameter - 1 at least m * n * r (inclusive)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    D = _diameter(inst) - 1.0
    threshold = m * inst.n * inst.r
    return SparsityCheck(sparse=D >= threshold, D=D, threshold=threshold)


def solve_two_tier_sparse(
    inst: Instance, m: int, eps: float = DEFAULT_EPS
) -> tuple[RelaySet, SolveReport]:
    """Grid-rounding solver for sparse instances, emitting succinct chains.

    Sensors are rounded to a square grid of spacing D/(n*m); a spanning tree
    over the rounded points is replaced by relay chains with spacing r, and
    each sensor is tied to its grid point by another chain. Rejects dense
    instances (D < m*n*r).
    """
    t0 = time.perf_counter()
    chk = is_sparse(inst, m)
    if not chk.sparse:
        raise DenseInstanceError(
            f"instance is dense: D = {chk.D:.6g} < m*n*r = {chk.threshold:.6g}"
        )
    dec = build_decomposition(inst, eps=eps)
    report = _empty_report("two-tier-sparse", inst, dec, params={"m": m, "eps": eps})
    report.notes.append(
        "spanning tree over rounded sensors is MST-based; the approximation "
        "factor of this step is a constant, not 1 + O(1/m)"
    )

    s = chk.D / (inst.n * m)
    xmin, ymin = inst.xy.min(axis=0)
    rounded_of_sensor: list[Point] = []
    for p in inst.sensors:
        gx = xmin + round((p.x - xmin) / s) * s
        gy = ymin + round((p.y - ymin) / s) * s
        rounded_of_sensor.append(Point(gx, gy))
    grid_points = sorted(set((p.x, p.y) for p in rounded_of_sensor))
    grid = [Point(x, y) for x, y in grid_points]

    chains: list[RelayChain] = []
    points: list[PlacedRelay] = []
    if len(grid) == 1:
        points.append(PlacedRelay(grid[0], "plain"))
    else:
        weighted = [
            (dist(grid[i], grid[j]), i, j)
            for i in range(len(grid))
            for j in range(i + 1, len(grid))
        ]
        uf = UnionFind(len(grid))
        for _, i, j in sorted(weighted):
            if uf.union(i, j):
                chains.append(RelayChain(a=grid[i], b=grid[j], spacing=inst.r))
    for p, g in zip(inst.sensors, rounded_of_sensor):
        if dist(p, g) <= eps:
            continue  # grid relay already sits on the sensor
        chains.append(RelayChain(a=p, b=g, spacing=inst.r))

    relays = RelaySet(points=points, chains=chains)
    lb = chk.D / inst.r  # any solution must span the diameter pair
    report.certificates.append(_cert("span_lower_bound", lb, relays.count_raw()))
    report.params["grid_spacing"] = s
    return _finish(relays, report, t0, eps)


def solve_two_tier_cover_connect(
    inst: Instance, eps: float = DEFAULT_EPS
) -> tuple[RelaySet, SolveReport]:
    """Greedy unit-disk cover of the sensors, then a Steinerized spanning tree
    over the cover relays. Works on any instance; serves as the dense-case
    two-tier baseline."""
    t0 = time.perf_counter()
    dec = build_decomposition(inst, eps=eps)
    report = _empty_report("two-tier-cover", inst, dec, params={"eps": eps})

    cands = sorted(candidate_points(inst.sensors, 1.0, eps=eps), key=lambda p: (p.x, p.y))
    masks = []
    for hit in coverage_sets(cands, inst.sensors, 1.0, eps=eps):
        m = 0
        for si in hit:
            m |= 1 << int(si)
        masks.append(m)
    full = (1 << inst.n) - 1
    covered = 0
    cover: list[Point] = []
    while covered != full:
        best_i, best_gain = -1, 0
        for i, m in enumerate(masks):
            gain = (m & ~covered).bit_count()
            if gain > best_gain:
                best_i, best_gain = i, gain
        assert best_gain > 0
        cover.append(cands[best_i])
        covered |= masks[best_i]
    report.stab_count = len(cover)

    placed = [PlacedRelay(p, "red") for p in cover]
    if len(cover) > 1:
        weighted = [
            (dist(cover[i], cover[j]), i, j)
            for i in range(len(cover))
            for j in range(i + 1, len(cover))
        ]
        uf = UnionFind(len(cover))
        for _, i, j in sorted(weighted):
            if uf.union(i, j):
                edge = ForestEdge(
                    from_id=i, to_id=j, endpoint_a=cover[i], endpoint_b=cover[j],
                    length=dist(cover[i], cover[j]),
                )
                for p in steinerize(edge, inst.r, eps=eps)[1:-1]:
                    placed.append(PlacedRelay(p, "yellow"))

    relays = RelaySet(points=_dedup_placed(placed, eps))
    return _finish(relays, report, t0, eps)
