"""Sublevel-set persistence (dimension 0) of a scalar field on a box grid.

Vertices carry field values and are 6-connected; an edge enters the
filtration at the max of its endpoint values, so connected components of the
sublevel set are exactly what a union-find sweep over vertices in ascending
(value, index) order tracks.  When two components meet, the younger root (in
the same total order) dies -- the elder rule -- and the merge records both
critical vertices, which is what lets losses route gradients back onto the
grid.  The one component that never dies is reported with its death capped at
the grid maximum so it can still participate in losses.
"""

from dataclasses import dataclass

import numpy as np

from .accel import jit_kernel
from .mlp import forward_values, sdf_forward

DEFAULT_DOMAIN = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


def _as_resolution(resolution):
    if np.isscalar(resolution):
        r = int(resolution)
        return (r, r, r)
    rx, ry, rz = (int(r) for r in resolution)
    return (rx, ry, rz)


@dataclass
class ScalarGrid:
    """Flat field samples with x fastest: index = x + rx * (y + ry * z)."""

    values: np.ndarray
    resolution: tuple = (16, 16, 16)
    domain: tuple = DEFAULT_DOMAIN

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        self.resolution = _as_resolution(self.resolution)
        lo, hi = self.domain
        self.domain = (tuple(float(c) for c in lo), tuple(float(c) for c in hi))
        rx, ry, rz = self.resolution
        if min(rx, ry, rz) < 2:
            raise ValueError(f"resolution must be >= 2 per axis, got {self.resolution}")
        if self.values.size != rx * ry * rz:
            raise ValueError(
                f"value count {self.values.size} != {rx}*{ry}*{rz}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def spacing(self):
        lo, hi = self.domain
        return tuple(
            (hi[a] - lo[a]) / (self.resolution[a] - 1) for a in range(3)
        )

    def vertex_positions(self):
        """(N, 3) positions in the same linear order as ``values``."""
        return grid_points(self.resolution, self.domain)


def grid_points(resolution, domain=DEFAULT_DOMAIN):
    rx, ry, rz = _as_resolution(resolution)
    lo, hi = domain
    xs = np.linspace(lo[0], hi[0], rx)
    ys = np.linspace(lo[1], hi[1], ry)
    zs = np.linspace(lo[2], hi[2], rz)
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)


@dataclass
class PersistencePair:
    birth: float
    death: float
    birth_vertex: int
    death_vertex: int
    essential: bool = False

    @property
    def persistence(self):
        return self.death - self.birth


@dataclass
class PersistenceDiagram:
    pairs: list
    grid_resolution: tuple
    filtration: str = "absolute"  # or "raw"

    def finite_pairs(self):
        return [p for p in self.pairs if not p.essential]

    def essential_pair(self):
        for p in self.pairs:
            if p.essential:
                return p
        return None


@dataclass
class GridEvaluation:
    """Field sampled on a grid, with what gradient routing needs: the sign of
    the raw field per vertex and the tape node carrying the raw values."""

    grid: ScalarGrid
    signs: np.ndarray
    node: object          # tape Var of raw field values, or None off-tape
    use_absolute: bool


def eval_grid(model, resolution=16, domain=DEFAULT_DOMAIN, tape=None,
              use_absolute=True):
    """Sample the model on the grid; filtration values are |f| by default."""
    resolution = _as_resolution(resolution)
    pts = grid_points(resolution, domain)
    if tape is not None:
        node = sdf_forward(model, pts, tape)
        raw = node.value
    else:
        node = None
        raw = forward_values(model, pts)
    if use_absolute:
        filt = np.abs(raw)
        signs = np.sign(raw)
    else:
        filt = raw.copy()
        signs = np.ones_like(raw)
    grid = ScalarGrid(filt, resolution, domain)
    return GridEvaluation(grid, signs, node, use_absolute)


# ---------------------------------------------------------------------------
# union-find sweep


def _uf_find(parent, v):
    while parent[v] != v:
        parent[v] = parent[parent[v]]
        v = parent[v]
    return v


def _sweep(order, rank, rx, ry, rz, out_birth_v, out_death_v):
    """Ascending sweep; for every merge of two live components, record
    (loser root, merge vertex).  Returns the number of finite pairs."""
    n = order.shape[0]
    parent = np.full(n, -1, dtype=np.int64)
    count = 0
    rxy = rx * ry
    for i in range(n):
        v = order[i]
        parent[v] = v
        x = v % rx
        y = (v // rx) % ry
        z = v // rxy
        for step in range(6):
            if step == 0:
                ok = x > 0
                w = v - 1
            elif step == 1:
                ok = x < rx - 1
                w = v + 1
            elif step == 2:
                ok = y > 0
                w = v - rx
            elif step == 3:
                ok = y < ry - 1
                w = v + rx
            elif step == 4:
                ok = z > 0
                w = v - rxy
            else:
                ok = z < rz - 1
                w = v + rxy
            if not ok or parent[w] < 0:
                continue
            rv = _uf_find(parent, v)
            rw = _uf_find(parent, w)
            if rv == rw:
                continue
            if rank[rv] < rank[rw]:
                winner, loser = rv, rw
            else:
                winner, loser = rw, rv
            parent[loser] = winner
            if loser != v:  # a real component dies; fresh singletons are not births
                out_birth_v[count] = loser
                out_death_v[count] = v
                count += 1
    return count


_uf_find = jit_kernel(_uf_find)
_sweep = jit_kernel(_sweep)


def persistence0(grid, filtration="absolute"):
    """0-dimensional persistence pairs of the sublevel filtration.

    Ties are resolved by linear index, making the sweep a total order and the
    result fully deterministic, critical vertices included.
    """
    values = grid.values
    rx, ry, rz = grid.resolution
    order = np.argsort(values, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    birth_v = np.empty(values.size, dtype=np.int64)
    death_v = np.empty(values.size, dtype=np.int64)
    count = _sweep(order, rank, rx, ry, rz, birth_v, death_v)
    pairs = [
        PersistencePair(
            float(values[birth_v[j]]), float(values[death_v[j]]),
            int(birth_v[j]), int(death_v[j]), False,
        )
        for j in range(count)
    ]
    root = int(order[0])
    top = int(order[-1])
    pairs.append(
        PersistencePair(float(values[root]), float(values[top]), root, top, True)
    )
    return PersistenceDiagram(pairs, grid.resolution, filtration)


def diagram_total_persistence(diagram):
    """Sum of (death - birth) over the finite pairs."""
    return float(sum(p.death - p.birth for p in diagram.finite_pairs()))
