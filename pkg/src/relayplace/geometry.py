"""Planar primitives: distances, circle intersections, arrangement candidate points.

All disk membership tests use closed disks with a small additive tolerance,
so points lying exactly on a circle boundary (arrangement vertices, tangency
points) count as covered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

DEFAULT_EPS = 1e-9


@dataclass(frozen=True)
class Point:
    """A point in the plane. One unit = the sensor communication radius."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates: ({self.x}, {self.y})")


@dataclass(frozen=True)
class Tolerance:
    """Absolute slack for distance comparisons: d <= t is tested as d <= t + eps."""

    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"eps must be positive and finite, got {self.eps}")

    def le(self, d: float, t: float) -> bool:
        return d <= t + self.eps


def dist(a: Point, b: Point) -> float:
    """Euclidean distance between two points."""
    return math.hypot(a.x - b.x, a.y - b.y)


def points_to_array(points) -> np.ndarray:
    """Stack points into an (n, 2) float array."""
    if len(points) == 0:
        return np.empty((0, 2), dtype=float)
    return np.array([(p.x, p.y) for p in points], dtype=float)


def array_to_points(arr: np.ndarray) -> list[Point]:
    return [Point(float(x), float(y)) for x, y in arr]


class CoincidentCentersError(ValueError):
    """Raised when two circle centers coincide within tolerance."""


def circle_intersections(
    c1: Point, r1: float, c2: Point, r2: float, eps: float = DEFAULT_EPS
) -> list[Point]:
    """Intersection points of two circles (0, 1, or 2 points).

    Tangency (external or internal, within eps) yields exactly one point.
    Raises CoincidentCentersError when the centers coincide within eps.
    """
    if r1 <= 0 or r2 <= 0:
        raise ValueError("circle radii must be positive")
    d = dist(c1, c2)
    if d <= eps:
        raise CoincidentCentersError(f"circle centers coincide: {c1} and {c2}")
    if d > r1 + r2 + eps or d < abs(r1 - r2) - eps:
        return []

    ux, uy = (c2.x - c1.x) / d, (c2.y - c1.y) / d
    # distance from c1 to the foot of the radical axis along the center line
    a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
    if abs(d - (r1 + r2)) <= eps or abs(d - abs(r1 - r2)) <= eps:
        return [Point(c1.x + a * ux, c1.y + a * uy)]
    h = math.sqrt(max(0.0, r1 * r1 - a * a))
    mx, my = c1.x + a * ux, c1.y + a * uy
    return [
        Point(mx + h * uy, my - h * ux),
        Point(mx - h * uy, my + h * ux),
    ]


def dedup_points(points: list[Point], eps: float = DEFAULT_EPS) -> list[Point]:
    """Drop points within eps of an earlier point (order-preserving)."""
    if not points:
        return []
    cell = max(eps, 1e-12)
    seen: dict[tuple[int, int], list[Point]] = {}
    out: list[Point] = []
    for p in points:
        ci, cj = int(math.floor(p.x / cell)), int(math.floor(p.y / cell))
        dup = False
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for q in seen.get((ci + di, cj + dj), ()):
                    if dist(p, q) <= eps:
                        dup = True
                        break
                if dup:
                    break
            if dup:
                break
        if not dup:
            out.append(p)
            seen.setdefault((ci, cj), []).append(p)
    return out


def candidate_points(
    centers: list[Point], radius: float, eps: float = DEFAULT_EPS
) -> list[Point]:
    """Representative points for the arrangement of equal-radius disks.

    Returns the centers plus all pairwise circle-circle intersection points
    (deduplicated within eps). For closed disks, the coverage set of any plane
    point is contained in the coverage set of some returned point, so argmax
    searches over coverage never lose depth by restricting to this set.
    """
    if not centers:
        raise ValueError("centers must be nonempty")
    if radius <= 0:
        raise ValueError("radius must be positive")
    pts = list(centers)
    if len(centers) > 1:
        arr = points_to_array(centers)
        tree = cKDTree(arr)
        # circles of equal radius intersect only when centers are within 2*radius
        for i, j in sorted(map(tuple, tree.query_pairs(2.0 * radius + eps))):
            a, b = centers[i], centers[j]
            if dist(a, b) <= eps:
                continue  # coincident sensors share one circle
            pts.extend(circle_intersections(a, radius, b, radius, eps=eps))
    return dedup_points(pts, eps=eps)


def coverage_depth(
    p: Point, centers: list[Point], radius: float, eps: float = DEFAULT_EPS
) -> int:
    """Number of centers whose closed radius-disk contains p (eps-tolerant)."""
    return sum(1 for c in centers if dist(p, c) <= radius + eps)


def coverage_sets(
    query_points: list[Point],
    centers: list[Point],
    radius: float,
    eps: float = DEFAULT_EPS,
) -> list[np.ndarray]:
    """For each query point, the indices of centers within radius (closed, eps-tolerant).

    Bulk variant of coverage_depth used by the stabbing and cover routines.
    """
    if not centers or not query_points:
        return [np.empty(0, dtype=int) for _ in query_points]
    tree = cKDTree(points_to_array(centers))
    hits = tree.query_ball_point(points_to_array(query_points), radius + eps, workers=-1)
    return [np.sort(np.asarray(h, dtype=int)) for h in hits]
