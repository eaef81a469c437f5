"""Point cloud normalization, exact nearest neighbors and query sampling.

The kd-tree is a flat-array median split (bucketed leaves) whose query loop
is one of the jit kernels.  Results are exact: candidates are compared by
(squared distance, point index), so ties always resolve to the lowest index,
and plane pruning uses a valid lower bound.
"""

from dataclasses import dataclass

import numpy as np

from .accel import jit_kernel
from .errors import DegenerateInputError

_LEAF_SIZE = 16


@dataclass
class PointCloud:
    """Normalized points plus the transform back to source units.

    normalized = (raw - translation) * scale, so ``scale`` is the
    original-to-normalized factor and ``translation`` the original center.
    """

    points: np.ndarray
    scale: float
    translation: np.ndarray

    def to_original(self, pts):
        return np.asarray(pts, dtype=np.float64) / self.scale + self.translation

    def to_normalized(self, raw):
        return (np.asarray(raw, dtype=np.float64) - self.translation) * self.scale


def normalize(raw_points, target_half_extent=0.9):
    """Center the cloud and scale its largest half extent to the target.

    All axes share one scale factor, so shape is preserved.
    """
    raw = np.ascontiguousarray(raw_points, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[1] != 3 or raw.shape[0] < 1:
        raise DegenerateInputError(f"expected a non-empty (n, 3) cloud, got {raw.shape}")
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    center = 0.5 * (lo + hi)
    half_extent = float(np.max(0.5 * (hi - lo)))
    if half_extent < 1e-12:
        raise DegenerateInputError(
            f"cloud has zero extent (all {raw.shape[0]} points coincide)"
        )
    scale = float(target_half_extent) / half_extent
    return PointCloud((raw - center) * scale, scale, center)


# ---------------------------------------------------------------------------
# kd-tree


def _build_nodes(points, leaf_size):
    n = points.shape[0]
    perm = np.empty(n, dtype=np.int64)
    node_dim, node_split = [], []
    node_left, node_right = [], []
    node_start, node_end = [], []

    def add_node():
        node_dim.append(-1)
        node_split.append(0.0)
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(0)
        node_end.append(0)
        return len(node_dim) - 1

    def build(subset):
        nid = add_node()
        if subset.size <= leaf_size:
            start = build.cursor
            end = start + subset.size
            perm[start:end] = subset
            node_start[nid] = start
            node_end[nid] = end
            build.cursor = end
            return nid
        coords = points[subset]
        dim = int(np.argmax(coords.max(axis=0) - coords.min(axis=0)))
        order = np.lexsort((subset, coords[:, dim]))
        ordered = subset[order]
        m = subset.size // 2
        node_dim[nid] = dim
        node_split[nid] = float(points[ordered[m], dim])
        node_left[nid] = build(ordered[:m])
        node_right[nid] = build(ordered[m:])
        return nid

    build.cursor = 0
    build(np.arange(n, dtype=np.int64))
    return (
        perm,
        np.asarray(node_dim, dtype=np.int64),
        np.asarray(node_split, dtype=np.float64),
        np.asarray(node_left, dtype=np.int64),
        np.asarray(node_right, dtype=np.int64),
        np.asarray(node_start, dtype=np.int64),
        np.asarray(node_end, dtype=np.int64),
    )


def _knn_insert(out_d2, out_idx, count, k, d2, idx):
    # keep (d2, idx) ascending; reject when not better than the current worst
    if count == k:
        w = count - 1
        if d2 > out_d2[w] or (d2 == out_d2[w] and idx > out_idx[w]):
            return count
        pos = w
    else:
        pos = count
        count += 1
    while pos > 0 and (
        d2 < out_d2[pos - 1] or (d2 == out_d2[pos - 1] and idx < out_idx[pos - 1])
    ):
        out_d2[pos] = out_d2[pos - 1]
        out_idx[pos] = out_idx[pos - 1]
        pos -= 1
    out_d2[pos] = d2
    out_idx[pos] = idx
    return count


def _query_batch(
    points, perm, node_dim, node_split, node_left, node_right,
    node_start, node_end, queries, k, out_d2, out_idx,
):
    m = queries.shape[0]
    stack_nodes = np.empty(2048, dtype=np.int64)
    stack_bounds = np.empty(2048, dtype=np.float64)
    for qi in range(m):
        qx = queries[qi, 0]
        qy = queries[qi, 1]
        qz = queries[qi, 2]
        count = 0
        sp = 0
        stack_nodes[0] = 0
        stack_bounds[0] = 0.0
        sp = 1
        while sp > 0:
            sp -= 1
            nid = stack_nodes[sp]
            bound = stack_bounds[sp]
            if count == k and bound > out_d2[qi, k - 1]:
                continue
            if node_dim[nid] < 0:  # leaf
                for j in range(node_start[nid], node_end[nid]):
                    p = perm[j]
                    dx = points[p, 0] - qx
                    dy = points[p, 1] - qy
                    dz = points[p, 2] - qz
                    d2 = dx * dx + dy * dy + dz * dz
                    count = _knn_insert(out_d2[qi], out_idx[qi], count, k, d2, p)
            else:
                dim = node_dim[nid]
                if dim == 0:
                    diff = qx - node_split[nid]
                elif dim == 1:
                    diff = qy - node_split[nid]
                else:
                    diff = qz - node_split[nid]
                if diff < 0.0:
                    near = node_left[nid]
                    far = node_right[nid]
                else:
                    near = node_right[nid]
                    far = node_left[nid]
                far_bound = diff * diff
                if far_bound < bound:
                    far_bound = bound
                stack_nodes[sp] = far
                stack_bounds[sp] = far_bound
                sp += 1
                stack_nodes[sp] = near
                stack_bounds[sp] = bound
                sp += 1


_query_batch = jit_kernel(_query_batch)
_knn_insert = jit_kernel(_knn_insert)


class KdTree:
    """Exact k-nearest-neighbor index over a fixed (n, 3) point set."""

    def __init__(self, points, leaf_size=_LEAF_SIZE):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise DegenerateInputError(f"expected a non-empty (n, 3) cloud, got {pts.shape}")
        self.points = pts
        (
            self._perm,
            self._dim,
            self._split,
            self._left,
            self._right,
            self._start,
            self._end,
        ) = _build_nodes(pts, leaf_size)

    def __len__(self):
        return self.points.shape[0]

    def query(self, queries, k=1):
        """Distances and indices of the k nearest points for each query row,
        ordered by (distance, index) ascending."""
        q = np.ascontiguousarray(queries, dtype=np.float64)
        single = q.ndim == 1
        if single:
            q = q[None, :]
        if q.ndim != 2 or q.shape[1] != 3:
            raise DegenerateInputError(f"expected (m, 3) queries, got {q.shape}")
        n = self.points.shape[0]
        if not (1 <= k <= n):
            raise ValueError(f"k={k} must satisfy 1 <= k <= {n}")
        out_d2 = np.full((q.shape[0], k), np.inf)
        out_idx = np.full((q.shape[0], k), -1, dtype=np.int64)
        _query_batch(
            self.points, self._perm, self._dim, self._split, self._left,
            self._right, self._start, self._end, q, k, out_d2, out_idx,
        )
        dist = np.sqrt(out_d2)
        if single:
            return dist[0], out_idx[0]
        return dist, out_idx


# ---------------------------------------------------------------------------
# sampling


@dataclass
class QueryBatch:
    """Query locations with the anchors and spreads that produced them."""

    queries: np.ndarray        # (c, 3)
    anchor_indices: np.ndarray  # (c,)
    sigma: np.ndarray          # (c,) spread used per query


def per_point_sigma(index, k=50):
    """Distance from each indexed point to its k-th nearest other point."""
    n = len(index)
    if not (1 <= k < n):
        raise ValueError(f"k={k} must satisfy 1 <= k < n={n}")
    dist, _ = index.query(index.points, k=k + 1)
    return dist[:, k]


def _as_rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def sample_queries(cloud, sigmas, count, rng, anchor_pool=None):
    """Gaussian query locations around uniformly chosen anchor points.

    ``rng`` is an integer seed or a numpy Generator; results are fully
    determined by it.  ``anchor_pool`` restricts anchor choice to a subset of
    point indices.
    """
    rng = _as_rng(rng)
    pts = cloud.points
    n = pts.shape[0]
    if sigmas.shape[0] != n:
        raise DegenerateInputError(
            f"sigma count {sigmas.shape[0]} != point count {n}"
        )
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    if anchor_pool is None:
        anchors = rng.integers(0, n, count)
    else:
        pool = np.asarray(anchor_pool, dtype=np.int64)
        anchors = pool[rng.integers(0, pool.shape[0], count)]
    sig = sigmas[anchors]
    offsets = rng.standard_normal((count, 3)) * sig[:, None]
    return QueryBatch(pts[anchors] + offsets, anchors, sig)


def nearest_surface_point(index, queries):
    """Closest indexed point per query; ties go to the lowest index."""
    dist, idx = index.query(queries, k=1)
    if np.ndim(dist) == 1 and np.asarray(queries).ndim == 1:
        return index.points[idx[0]], int(idx[0])
    return index.points[idx[:, 0]], idx[:, 0]
