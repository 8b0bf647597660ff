"""Partition sensors into blobs (components at hop distance 1) and clouds (at 2)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import DEFAULT_EPS, Point, points_to_array


@dataclass
class Instance:
    """A relay placement instance: sensor locations plus the relay range r.

    Coordinates are in units of the sensor communication radius, so sensors
    talk to anything within distance 1 and relays to relays within distance r.
    The sensor list may contain duplicates (distinct sensors at one location).
    """

    sensors: list[Point]
    r: float

    def __post_init__(self):
        if len(self.sensors) < 1:
            raise ValueError("instance needs at least one sensor")
        if self.r < 1:
            raise ValueError(f"relay range must be >= 1, got {self.r}")
        self._xy = None

    @property
    def n(self) -> int:
        return len(self.sensors)

    @property
    def xy(self) -> np.ndarray:
        if self._xy is None:
            self._xy = points_to_array(self.sensors)
        return self._xy


class UnionFind:
    """Union-find with path compression over 0..n-1."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.count = n

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        self.count -= 1
        return True


@dataclass
class Decomposition:
    """Blob/cloud partition of sensor indices, with the blob-to-cloud refinement.

    Ids are assigned by the smallest sensor index contained in the group, so
    identical instances always decompose identically.
    """

    blob_of: list[int]
    cloud_of: list[int]
    blob_sensors: list[list[int]] = field(repr=False)
    cloud_sensors: list[list[int]] = field(repr=False)
    blobs_in_cloud: list[list[int]] = field(repr=False)
    cloud_of_blob: list[int] = field(repr=False)

    @property
    def n_blobs(self) -> int:
        return len(self.blob_sensors)

    @property
    def n_clouds(self) -> int:
        return len(self.cloud_sensors)


def _components(xy: np.ndarray, threshold: float, eps: float) -> list[int]:
    n = len(xy)
    uf = UnionFind(n)
    if n > 1:
        tree = cKDTree(xy)
        for i, j in tree.query_pairs(threshold + eps):
            uf.union(i, j)
    # relabel components by smallest contained sensor index
    first_seen: dict[int, int] = {}
    labels = [0] * n
    for i in range(n):
        root = uf.find(i)
        if root not in first_seen:
            first_seen[root] = len(first_seen)
        labels[i] = first_seen[root]
    return labels


def _group(labels: list[int]) -> list[list[int]]:
    groups: list[list[int]] = [[] for _ in range(max(labels) + 1)]
    for i, g in enumerate(labels):
        groups[g].append(i)
    return groups


def build_decomposition(inst: Instance, eps: float = DEFAULT_EPS) -> Decomposition:
    """Blobs are components of the sensor graph at threshold 1, clouds at threshold 2."""
    blob_of = _components(inst.xy, 1.0, eps)
    cloud_of = _components(inst.xy, 2.0, eps)
    blob_sensors = _group(blob_of)
    cloud_sensors = _group(cloud_of)
    cloud_of_blob = [cloud_of[members[0]] for members in blob_sensors]
    blobs_in_cloud: list[list[int]] = [[] for _ in cloud_sensors]
    for b, c in enumerate(cloud_of_blob):
        blobs_in_cloud[c].append(b)
    return Decomposition(
        blob_of=blob_of,
        cloud_of=cloud_of,
        blob_sensors=blob_sensors,
        cloud_sensors=cloud_sensors,
        blobs_in_cloud=blobs_in_cloud,
        cloud_of_blob=cloud_of_blob,
    )
