"""Shared brute-force oracles and finite-difference helpers for the tests.

Everything here is deliberately independent of the package internals: plain
double loops, flood fill and central differences, kept slow and obvious so the
fast implementations can be checked against them.
"""

import numpy as np


def central_diff(f, x, h=1e-6):
    """Central-difference gradient of scalar f at flat float64 array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def max_rel_err(analytic, numeric):
    """Max abs difference normalized by the largest reference magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / denom)


def brute_nearest(points, query):
    """Index of the nearest point, ties broken by lowest index."""
    best = -1
    best_d = np.inf
    for i in range(points.shape[0]):
        d = 0.0
        for a in range(points.shape[1]):
            diff = points[i, a] - query[a]
            d += diff * diff
        if d < best_d:
            best_d = d
            best = i
    return best, np.sqrt(best_d)


def brute_knn(points, query, k):
    """k nearest indices sorted by (distance, index)."""
    d2 = np.sum((points - query) ** 2, axis=1)
    order = sorted(range(len(d2)), key=lambda i: (d2[i], i))
    idx = np.array(order[:k], dtype=np.int64)
    return idx, np.sqrt(d2[idx])

def _brute_min_distances(p, q):
    """Closest distance from each p row to q, distances evaluated row by row
    exactly as the scalar double loop would (same float operation order)."""
    out = np.empty(p.shape[0])
    for i in range(p.shape[0]):
        out[i] = np.sqrt(np.min(np.sum((p[i] - q) ** 2, axis=1)))
    return out


def brute_chamfer_one_sided(p, q):
    total = 0.0
    for d in _brute_min_distances(p, q):
        total += d
    return total / p.shape[0]


def brute_hausdorff_one_sided(p, q):
    return float(np.max(_brute_min_distances(p, q)))


def sublevel_component_count(values, shape, threshold):
    """Connected components of {v : value[v] <= threshold} by flood fill.

    ``values`` is flat with x fastest: index = x + rx * (y + ry * z).
    Neighbors share a face (6-connectivity).
    """
    rx, ry, rz = shape
    active = values <= threshold
    seen = np.zeros(values.size, dtype=bool)
    count = 0
    for start in range(values.size):
        if not active[start] or seen[start]:
            continue
        count += 1
        stack = [start]
        seen[start] = True
        while stack:
            v = stack.pop()
            x = v % rx
            y = (v // rx) % ry
            z = v // (rx * ry)
            for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0),
                               (0, -1, 0), (0, 0, 1), (0, 0, -1)):
                nx, ny, nz = x + dx, y + dy, z + dz
                if 0 <= nx < rx and 0 <= ny < ry and 0 <= nz < rz:
                    w = nx + rx * (ny + ry * nz)
                    if active[w] and not seen[w]:
                        seen[w] = True
                        stack.append(w)
    return count


def mesh_component_count_bfs(triangles, n_vertices):
    """Connected components of a triangle soup; triangles sharing any vertex
    are connected.  Returns (count, component id per triangle)."""
    t = len(triangles)
    vert_to_tris = [[] for _ in range(n_vertices)]
    for ti, tri in enumerate(triangles):
        for v in tri:
            vert_to_tris[v].append(ti)
    label = np.full(t, -1, dtype=np.int64)
    count = 0
    for start in range(t):
        if label[start] != -1:
            continue
        stack = [start]
        label[start] = count
        while stack:
            ti = stack.pop()
            for v in triangles[ti]:
                for tj in vert_to_tris[v]:
                    if label[tj] == -1:
                        label[tj] = count
                        stack.append(tj)
        count += 1
    return count, label
