"""Iso-surface extraction from the signed field, mesh connectivity, and
area-weighted surface sampling.

Extraction is classic table-driven cube marching over the raw signed values
(the absolute-value grid is for filtrations only).  Crossing vertices are
welded globally: every intersected grid edge gets exactly one mesh vertex,
created in a fixed scan order, so the output is deterministic and watertight
up to the usual table ambiguities.
"""

from dataclasses import dataclass, field

import numpy as np

from .accel import jit_kernel
from .errors import DegenerateInputError, EmptyMeshError
from .filtration import DEFAULT_DOMAIN, _as_resolution, grid_points
from .mctables import TRI_TABLE
from .mlp import forward_values

_TRI_LEN = np.array([len(r) for r in TRI_TABLE], dtype=np.int64)
_TRI_ARRAY = np.full((256, 16), -1, dtype=np.int64)
for _case, _row in enumerate(TRI_TABLE):
    _TRI_ARRAY[_case, : len(_row)] = _row

# cube corners 0..7: (x,y,z), (x+1,y,z), (x+1,y+1,z), (x,y+1,z), then the
# same square at z+1; edge e runs along _EDGE_AXIS[e] starting at the corner
# offset by _EDGE_BASE[e]
_EDGE_AXIS = np.array([0, 1, 0, 1, 0, 1, 0, 1, 2, 2, 2, 2], dtype=np.int64)
_EDGE_BASE = np.array(
    [
        [0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0],
        [0, 0, 1], [1, 0, 1], [0, 1, 1], [0, 0, 1],
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
    ],
    dtype=np.int64,
)

_CORNER_OFFSETS = np.array(
    [
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ],
    dtype=np.int64,
)


@dataclass
class TriangleMesh:
    vertices: np.ndarray                  # (m, 3) float64
    triangles: np.ndarray                 # (t, 3) int32 vertex indices
    component_labels: np.ndarray = field(default=None)  # (t,) filled on demand

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)
        if self.triangles.size:
            if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
                raise ValueError("triangle index out of range")

    def triangle_areas(self):
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def area(self):
        return float(np.sum(self.triangle_areas()))


def _weld_vertices(inside, origin, spacing, values, iso):
    """One mesh vertex per sign-crossing grid edge, per axis, in scan order.

    Returns (vid arrays per axis indexed [z, y, x], vertex positions).
    """
    rz, ry, rx = values.shape
    vids = []
    positions = []
    counter = 0
    for axis, shape in ((0, (rz, ry, rx - 1)), (1, (rz, ry - 1, rx)),
                        (2, (rz - 1, ry, rx))):
        lo = values[: shape[0], : shape[1], : shape[2]]
        if axis == 0:
            hi = values[:, :, 1:]
            ilo, ihi = inside[:, :, :-1], inside[:, :, 1:]
        elif axis == 1:
            hi = values[:, 1:, :]
            ilo, ihi = inside[:, :-1, :], inside[:, 1:, :]
        else:
            hi = values[1:, :, :]
            ilo, ihi = inside[:-1, :, :], inside[1:, :, :]
        crossing = ilo != ihi
        vid = np.full(shape, -1, dtype=np.int32)
        zz, yy, xx = np.nonzero(crossing)
        vid[zz, yy, xx] = counter + np.arange(zz.size, dtype=np.int32)
        counter += zz.size
        f0 = lo[zz, yy, xx]
        f1 = hi[zz, yy, xx]
        t = (iso - f0) / (f1 - f0)
        pos = np.empty((zz.size, 3))
        pos[:, 0] = origin[0] + xx * spacing[0]
        pos[:, 1] = origin[1] + yy * spacing[1]
        pos[:, 2] = origin[2] + zz * spacing[2]
        pos[:, axis] += t * spacing[axis]
        vids.append(vid)
        positions.append(pos)
    return vids, np.concatenate(positions) if counter else np.zeros((0, 3))


def _emit_triangles(inside, vidx, vidy, vidz, tri_array, tri_len,
                    edge_axis, edge_base, out_tris):
    rz, ry, rx = inside.shape
    count = 0
    for z in range(rz - 1):
        for y in range(ry - 1):
            for x in range(rx - 1):
                case = 0
                if inside[z, y, x]:
                    case |= 1
                if inside[z, y, x + 1]:
                    case |= 2
                if inside[z, y + 1, x + 1]:
                    case |= 4
                if inside[z, y + 1, x]:
                    case |= 8
                if inside[z + 1, y, x]:
                    case |= 16
                if inside[z + 1, y, x + 1]:
                    case |= 32
                if inside[z + 1, y + 1, x + 1]:
                    case |= 64
                if inside[z + 1, y + 1, x]:
                    case |= 128
                n = tri_len[case]
                for j in range(n):
                    e = tri_array[case, j]
                    ax = edge_axis[e]
                    ex = x + edge_base[e, 0]
                    ey = y + edge_base[e, 1]
                    ez = z + edge_base[e, 2]
                    if ax == 0:
                        v = vidx[ez, ey, ex]
                    elif ax == 1:
                        v = vidy[ez, ey, ex]
                    else:
                        v = vidz[ez, ey, ex]
                    out_tris[count, j % 3] = v
                    if j % 3 == 2:
                        count += 1
    return count


_emit_triangles = jit_kernel(_emit_triangles)


def marching_cubes_grid(values, resolution, domain=DEFAULT_DOMAIN, iso=0.0):
    """Extract the iso-surface of gridded field values (flat, x fastest)."""
    resolution = _as_resolution(resolution)
    rx, ry, rz = resolution
    values = np.asarray(values, dtype=np.float64).reshape(rz, ry, rx)
    vmin, vmax = float(values.min()), float(values.max())
    if vmin >= iso or vmax < iso:
        raise EmptyMeshError(vmin, vmax, iso)
    lo, hi = domain
    origin = np.asarray(lo, dtype=np.float64)
    spacing = np.array([
        (hi[d] - lo[d]) / (resolution[d] - 1) for d in range(3)
    ])
    inside = values < iso
    (vidx, vidy, vidz), verts = _weld_vertices(inside, origin, spacing,
                                               values, iso)
    ntris = int(np.sum(_TRI_LEN[_cell_cases(inside)]) // 3)
    tris = np.empty((ntris, 3), dtype=np.int32)
    filled = _emit_triangles(inside, vidx, vidy, vidz, _TRI_ARRAY,
                             _TRI_LEN, _EDGE_AXIS, _EDGE_BASE, tris)
    assert filled == ntris
    return TriangleMesh(verts, tris)


def _cell_cases(inside):
    rz, ry, rx = inside.shape
    cases = np.zeros((rz - 1, ry - 1, rx - 1), dtype=np.int64)
    for bit, (ox, oy, oz) in enumerate(_CORNER_OFFSETS):
        corner = inside[oz: rz - 1 + oz, oy: ry - 1 + oy, ox: rx - 1 + ox]
        cases |= corner.astype(np.int64) << bit
    return cases


def marching_cubes(model, resolution=256, domain=DEFAULT_DOMAIN, iso=0.0):
    """Mesh the iso level set of the model's raw signed field."""
    resolution = _as_resolution(resolution)
    if min(resolution) < 8:
        raise ValueError(f"resolution {resolution} too coarse; need >= 8 per axis")
    values = forward_values(model, grid_points(resolution, domain))
    return marching_cubes_grid(values, resolution, domain, iso)


def mesh_components(mesh):
    """(component count, triangle counts per component); triangles sharing a
    vertex are connected.  Labels are written back onto the mesh in
    first-appearance order."""
    tris = mesh.triangles
    if len(tris) == 0:
        mesh.component_labels = np.zeros(0, dtype=np.int64)
        return 0, []
    parent = np.arange(len(mesh.vertices))

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for a, b, c in tris:
        ra, rb, rc = find(a), find(b), find(c)
        parent[rb] = ra
        parent[find(rc)] = find(ra)

    labels = np.empty(len(tris), dtype=np.int64)
    remap = {}
    for t in range(len(tris)):
        root = find(tris[t, 0])
        if root not in remap:
            remap[root] = len(remap)
        labels[t] = remap[root]
    mesh.component_labels = labels
    sizes = np.bincount(labels).tolist()
    return len(remap), sizes


def sample_surface(mesh, n, seed=0):
    """n points drawn uniformly by area across the mesh, fixed per seed."""
    areas = mesh.triangle_areas()
    total = float(areas.sum())
    if len(mesh.triangles) == 0 or total <= 0.0:
        raise DegenerateInputError("mesh has no area to sample")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(areas), size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    a = mesh.vertices[mesh.triangles[chosen, 0]]
    b = mesh.vertices[mesh.triangles[chosen, 1]]
    c = mesh.vertices[mesh.triangles[chosen, 2]]
    return a + u[:, None] * (b - a) + v[:, None] * (c - a)
