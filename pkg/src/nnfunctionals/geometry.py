"""Exact nearest-neighbour distances within and across samples.

Distances are Euclidean. A k-d tree (scipy's ``cKDTree``) is used up to
``KDTREE_MAX_DIM`` dimensions and a chunked brute-force search above that;
:func:`knn_brute` is kept as an always-available reference.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.spatial import cKDTree

from .errors import CoincidentPointsError, SampleError
from .special import unit_ball_volume

__all__ = [
    "Sample",
    "KnnDistances",
    "knn_within",
    "knn_cross",
    "knn_brute",
    "density_estimate",
    "KDTREE_MAX_DIM",
]

KDTREE_MAX_DIM = 16
_BRUTE_CHUNK = 512


@dataclass(frozen=True, eq=False)
class Sample:
    """An ordered set of ``m`` points in ``d`` dimensions.

    Rows keep their input order. Duplicate rows are rejected unless
    ``allow_duplicates`` is set, because a zero within-sample distance makes
    the density estimate infinite.
    """

    points: np.ndarray

    def __init__(self, points, *, allow_duplicates: bool = False):
        arr = np.array(points, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise SampleError(f"points must be a 1-d or 2-d array, got ndim={arr.ndim}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise SampleError(f"need at least one point and one dimension, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = int(np.argwhere(~np.isfinite(arr))[0, 0])
            raise SampleError(f"non-finite coordinate in row {bad}")
        if not allow_duplicates and arr.shape[0] > 1:
            _reject_duplicates(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.m

    def __repr__(self) -> str:
        return f"Sample(m={self.m}, d={self.d})"


def _reject_duplicates(arr: np.ndarray) -> None:
    order = np.lexsort(arr.T[::-1])
    srt = arr[order]
    same = np.all(srt[1:] == srt[:-1], axis=1)
    if np.any(same):
        pos = int(np.argmax(same))
        i, j = sorted((int(order[pos]), int(order[pos + 1])))
        raise CoincidentPointsError(
            f"rows {i} and {j} coincide; nearest-neighbour densities need distinct points"
        )


@dataclass(frozen=True)
class KnnDistances:
    """Sorted neighbour distances; column ``j - 1`` holds the j-th nearest."""

    dists: np.ndarray
    k: int
    mode: Literal["within", "cross"]

    def column(self, j: int) -> np.ndarray:
        if not 1 <= j <= self.k:
            raise ValueError(f"neighbour index {j} outside 1..{self.k}")
        return self.dists[:, j - 1]


def knn_brute(queries: np.ndarray, reference: np.ndarray, k: int, exclude_self: bool = False) -> np.ndarray:
    """O(m n) exact k-nearest distances; with ``exclude_self`` queries must equal reference."""
    queries = np.asarray(queries, dtype=float)
    reference = np.asarray(reference, dtype=float)
    out = np.empty((queries.shape[0], k))
    for start in range(0, queries.shape[0], _BRUTE_CHUNK):
        block = queries[start:start + _BRUTE_CHUNK]
        diff = block[:, None, :] - reference[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        if exclude_self:
            rows = np.arange(block.shape[0])
            dist[rows, start + rows] = np.inf
        if k < dist.shape[1]:
            part = np.partition(dist, k - 1, axis=1)[:, :k]
        else:
            part = dist
        out[start:start + block.shape[0]] = np.sort(part, axis=1)[:, :k]
    return out


def _tree_query(tree: cKDTree, queries: np.ndarray, k: int) -> np.ndarray:
    dist, _ = tree.query(queries, k=k)
    return np.asarray(dist, dtype=float).reshape(queries.shape[0], k)


def knn_within(sample: Sample, k: int) -> KnnDistances:
    """Distances from each point to its 1st..k-th nearest neighbours, excluding itself."""
    m = sample.m
    if m < 2:
        raise SampleError("within-sample neighbours need at least two points")
    if not 1 <= k <= m - 1:
        raise ValueError(f"k={k} outside 1..{m - 1}")
    pts = sample.points
    if sample.d <= KDTREE_MAX_DIM:
        dist = _tree_query(cKDTree(pts), pts, k + 1)
        # Column 0 is the query point itself (distinct points => unique zero).
        dist = dist[:, 1:]
    else:
        dist = knn_brute(pts, pts, k, exclude_self=True)
    if np.any(dist[:, 0] <= 0.0):
        raise CoincidentPointsError("zero within-sample distance: coincident points")
    dist.setflags(write=False)
    return KnnDistances(dist, k, "within")


def knn_cross(queries: Sample, reference: Sample, k: int) -> KnnDistances:
    """Distances from each query to its 1st..k-th nearest reference points."""
    if queries.d != reference.d:
        raise SampleError(f"dimension mismatch: {queries.d} vs {reference.d}")
    n = reference.m
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside 1..{n}")
    if queries.d <= KDTREE_MAX_DIM:
        dist = _tree_query(cKDTree(reference.points), queries.points, k)
    else:
        dist = knn_brute(queries.points, reference.points, k)
    dist.setflags(write=False)
    return KnnDistances(dist, k, "cross")


def density_estimate(dists: KnnDistances, sample_size: int, d: int, j: int) -> np.ndarray:
    """The j-th neighbour density estimate ``j / (N V_d rho_j^d)`` at every query point."""
    rho = dists.column(j)
    if np.any(rho <= 0.0):
        bad = int(np.argmax(rho <= 0.0))
        raise CoincidentPointsError(
            f"zero {j}-th neighbour distance at query {bad}: density estimate would be infinite"
        )
    return j / (sample_size * unit_ball_volume(d) * rho ** d)
