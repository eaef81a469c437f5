"""File formats: point-cloud readers, OBJ meshes, diagram/history CSV,
metrics-report JSON, binary checkpoints, and the flat `key = value` run
configuration.

Text floats are written with repr so every value round-trips exactly, which
makes the config echo a byte-stable fixpoint and lets reread diagrams and
histories compare bit-for-bit.
"""

import json
import struct
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import DegenerateInputError, ParseError, UnsupportedFormatError
from .filtration import PersistenceDiagram, PersistencePair
from .losses import LossWeights, TopoConfig
from .meshing import TriangleMesh
from .metrics import MetricsReport
from .mlp import Architecture, SdfModel
from .training import TrainConfig, TrainHistory


# ---------------------------------------------------------------------------
# point clouds

def load_xyz(path):
    """Points from whitespace-separated "x y z [extras]" lines.

    Lines starting with '#' and blank lines are skipped; columns beyond the
    third (normals, colors) are ignored.
    """
    points = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            cols = text.split()
            if len(cols) < 3:
                raise ParseError(
                    f"expected at least 3 columns, got {len(cols)}",
                    path=path, line=lineno,
                )
            try:
                points.append((float(cols[0]), float(cols[1]), float(cols[2])))
            except ValueError:
                raise ParseError(
                    f"non-numeric coordinate in {cols[:3]}", path=path, line=lineno
                ) from None
    if len(points) < 2:
        raise DegenerateInputError(
            f"{path}: need at least 2 points, got {len(points)}"
        )
    return np.array(points, dtype=np.float64)


def save_xyz(points, path):
    with open(path, "w") as fh:
        for x, y, z in np.asarray(points, dtype=np.float64).tolist():
            fh.write(f"{x!r} {y!r} {z!r}\n")


def load_ply_ascii(path):
    """Vertex positions from a minimal ascii PLY.

    Requires float x/y/z properties on the vertex element; every other
    element and property is skipped.  Binary variants are not supported.
    """
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0].strip() != "ply":
        raise UnsupportedFormatError(f"{path}: missing 'ply' magic line")
    elements = []          # (name, count, [property names]) in declared order
    header_end = None
    for lineno, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] != "ascii":
                raise UnsupportedFormatError(
                    f"{path}: only ascii PLY is supported, got {raw.strip()!r}"
                )
        elif parts[0] == "element":
            if len(parts) != 3:
                raise ParseError("malformed element line", path=path, line=lineno)
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise ParseError("property before any element", path=path, line=lineno)
            elements[-1][2].append(parts[-1])
        elif parts[0] == "end_header":
            header_end = lineno
            break
    if header_end is None:
        raise ParseError("missing end_header", path=path)
    vertex = next((e for e in elements if e[0] == "vertex"), None)
    if vertex is None:
        raise UnsupportedFormatError(f"{path}: no vertex element")
    try:
        cols = [vertex[2].index(axis) for axis in ("x", "y", "z")]
    except ValueError:
        raise UnsupportedFormatError(
            f"{path}: vertex element lacks x/y/z properties (has {vertex[2]})"
        ) from None
    cursor = header_end            # 0-based index of first data line
    points = None
    for name, count, _props in elements:
        block = lines[cursor:cursor + count]
        if len(block) < count:
            raise ParseError(
                f"element {name!r} declares {count} rows but only "
                f"{len(block)} data lines remain",
                path=path, line=cursor + len(block) + 1,
            )
        if name == "vertex":
            points = np.empty((count, 3), dtype=np.float64)
            for i, row in enumerate(block):
                vals = row.split()
                try:
                    points[i] = [float(vals[c]) for c in cols]
                except (ValueError, IndexError):
                    raise ParseError(
                        f"bad vertex row {row!r}", path=path, line=cursor + i + 1
                    ) from None
        cursor += count
    if points.shape[0] < 2:
        raise DegenerateInputError(
            f"{path}: need at least 2 points, got {points.shape[0]}"
        )
    return points


# ---------------------------------------------------------------------------
# meshes

def save_obj(mesh, path):
    """Wavefront OBJ with 9-significant-digit vertices and 1-based faces."""
    with open(path, "w") as fh:
        if len(mesh.vertices) == 0:
            fh.write("# empty mesh: no level-set crossing\n")
            return
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def load_obj(path):
    """Minimal OBJ reader for v/f lines; face entries may carry /vt/vn
    suffixes, and extra line types are ignored."""
    vertices, triangles = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0] not in ("v", "f"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ParseError("short vertex line", path=path, line=lineno)
                vertices.append([float(v) for v in parts[1:4]])
            else:
                if len(parts) != 4:
                    raise ParseError(
                        "only triangular faces are supported", path=path, line=lineno
                    )
                triangles.append(
                    [int(p.split("/")[0]) - 1 for p in parts[1:4]]
                )
    return TriangleMesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(triangles, dtype=np.int32).reshape(-1, 3),
    )


# ---------------------------------------------------------------------------
# persistence diagrams

DIAGRAM_HEADER = "dim,birth,death,birth_index,death_index,essential"


def export_diagram(diagram, path):
    """CSV rows sorted by (birth, birth_index); dim is always 0."""
    rows = sorted(diagram.pairs, key=lambda p: (p.birth, p.birth_vertex))
    with open(path, "w") as fh:
        fh.write(DIAGRAM_HEADER + "\n")
        for p in rows:
            fh.write(
                f"0,{float(p.birth)!r},{float(p.death)!r},{int(p.birth_vertex)},"
                f"{int(p.death_vertex)},{int(p.essential)}\n"
            )


def load_diagram(path, grid_resolution=None, filtration="absolute"):
    pairs = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != DIAGRAM_HEADER:
            raise ParseError(
                f"expected header {DIAGRAM_HEADER!r}, got {header!r}",
                path=path, line=1,
            )
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            cols = line.strip().split(",")
            if len(cols) != 6:
                raise ParseError("expected 6 columns", path=path, line=lineno)
            if cols[0] != "0":
                raise ParseError(
                    f"only dimension-0 rows are supported, got {cols[0]}",
                    path=path, line=lineno,
                )
            pairs.append(
                PersistencePair(
                    birth=float(cols[1]),
                    death=float(cols[2]),
                    birth_vertex=int(cols[3]),
                    death_vertex=int(cols[4]),
                    essential=bool(int(cols[5])),
                )
            )
    return PersistenceDiagram(pairs, grid_resolution, filtration)


# ---------------------------------------------------------------------------
# training history and metrics report

HISTORY_HEADER = "iter,loss_total,loss_pull,loss_sig,loss_noise,lr,dropped_queries"


def save_history(history, path):
    with open(path, "w") as fh:
        fh.write(HISTORY_HEADER + "\n")
        for it, total, pull, sig, noise, lr, dropped in history.rows():
            fh.write(f"{it},{total!r},{pull!r},{sig!r},{noise!r},{lr!r},{dropped}\n")


def load_history(path):
    cols = [[], [], [], [], [], [], []]
    with open(path) as fh:
        header = fh.readline().strip()
        if header != HISTORY_HEADER:
            raise ParseError(
                f"expected header {HISTORY_HEADER!r}, got {header!r}",
                path=path, line=1,
            )
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            vals = line.strip().split(",")
            if len(vals) != 7:
                raise ParseError("expected 7 columns", path=path, line=lineno)
            for store, val in zip(cols, vals):
                store.append(float(val))
    return TrainHistory(
        iters=np.array(cols[0], dtype=np.int64),
        total=np.array(cols[1]),
        pull=np.array(cols[2]),
        significant=np.array(cols[3]),
        noise=np.array(cols[4]),
        lr=np.array(cols[5]),
        dropped=np.array(cols[6], dtype=np.int64),
    )


def save_report(report, path):
    with open(path, "w") as fh:
        json.dump(asdict(report), fh, indent=2)
        fh.write("\n")


def load_report(path):
    with open(path) as fh:
        return MetricsReport(**json.load(fh))


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = b"STCH"
CHECKPOINT_VERSION = 1


def save_checkpoint(model, path):
    """Binary model snapshot: magic, version, architecture, init descriptor,
    then little-endian float64 parameters layer-major, weights before bias."""
    arch = model.arch
    desc = json.dumps(model.init_descriptor, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack(
            "<6I", CHECKPOINT_VERSION, arch.layer_count, arch.hidden_width,
            arch.skip_layer, arch.input_dim, arch.output_dim,
        ))
        fh.write(struct.pack("<I", len(desc)))
        fh.write(desc)
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise ParseError(f"not a checkpoint (magic {blob[:4]!r})", path=path)
    version, layers, width, skip, in_dim, out_dim = struct.unpack_from("<6I", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise UnsupportedFormatError(
            f"{path}: checkpoint version {version} not supported "
            f"(expected {CHECKPOINT_VERSION})"
        )
    (desc_len,) = struct.unpack_from("<I", blob, 28)
    offset = 32
    descriptor = json.loads(blob[offset:offset + desc_len].decode())
    offset += desc_len
    arch = Architecture(layers, width, skip, in_dim, out_dim)
    expected = offset + 8 * arch.param_count()
    if len(blob) != expected:
        raise ParseError(
            f"parameter blob is {len(blob) - offset} bytes, "
            f"expected {expected - offset}",
            path=path,
        )
    weights, biases = [], []
    for fan_in, fan_out in arch.layer_shapes():
        w = np.frombuffer(blob, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).copy())
        biases.append(b.copy())
    return SdfModel(arch, weights, biases, descriptor)


# ---------------------------------------------------------------------------
# run configuration

@dataclass
class RunConfig:
    """Flat, fully defaulted settings for one reconstruction run."""

    # paths
    input: str = ""
    out: str = ""
    # network
    layer_count: int = 8
    hidden_width: int = 256
    skip_layer: int = 4
    init: str = "geometric"
    init_radius: float = 0.5
    # optimization
    iterations: int = 40000
    batch_points: int = 20000
    batch_queries: int = 4096
    optimizer: str = "adam"
    base_lr: float = 0.001
    warmup_iters: int = 1000
    sigma_k: int = 50
    sgd_noise_std: float = 0.0
    seed: int = 0
    # loss weighting
    lambda_significant: float = 0.5
    lambda_noise: float = 5.0
    curriculum_start_iter: int = 39500
    # topology term
    topo_resolution: int = 16
    filtration: str = "absolute"       # "absolute" | "raw"
    partition_rule: str = "top_k"      # "top_k" | "threshold"
    k: int = 1
    tau: float = 0.01
    birth_term_set: str = "noise"      # "noise" | "significant"
    include_essential: bool = True
    # meshing
    mesh_resolution: int = 256
    iso: float = 0.0
    # metrics
    metric_samples: int = 100000
    metric_seed: int = 0


def render_config(config):
    """One `key = value` line per field, in declaration order; floats use
    repr so rendering is a byte-stable fixpoint under parse_config."""
    out = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        out.append(f"{f.name} = {text}")
    return "\n".join(out) + "\n"


def _parse_value(name, kind, raw, path, lineno):
    if kind is bool:
        if raw not in ("true", "false"):
            raise ParseError(
                f"{name} expects true/false, got {raw!r}", path=path, line=lineno
            )
        return raw == "true"
    if kind is str:
        return raw
    try:
        return kind(raw)
    except ValueError:
        raise ParseError(
            f"{name} expects {kind.__name__}, got {raw!r}", path=path, line=lineno
        ) from None


def parse_config(text, path=None):
    """RunConfig from `key = value` lines; '#' comments and blanks allowed,
    unknown and repeated keys rejected."""
    types = {f.name: f.type for f in fields(RunConfig)}
    kinds = {"int": int, "float": float, "str": str, "bool": bool}
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ParseError(
                f"expected 'key = value', got {stripped!r}", path=path, line=lineno
            )
        key, _, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in types:
            raise ParseError(f"unknown key {key!r}", path=path, line=lineno)
        if key in seen:
            raise ParseError(f"repeated key {key!r}", path=path, line=lineno)
        kind = types[key] if isinstance(types[key], type) else kinds[types[key]]
        seen[key] = _parse_value(key, kind, raw, path, lineno)
    return RunConfig(**seen)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read(), path=path)


def to_train_config(config):
    """TrainConfig (with nested architecture/topology/weights) from the flat
    run settings."""
    if config.filtration not in ("absolute", "raw"):
        raise ValueError(
            f"filtration must be 'absolute' or 'raw', got {config.filtration!r}"
        )
    arch = Architecture(
        layer_count=config.layer_count,
        hidden_width=config.hidden_width,
        skip_layer=config.skip_layer,
    )
    topo = TopoConfig(
        grid_resolution=config.topo_resolution,
        use_absolute=config.filtration == "absolute",
        partition_rule=config.partition_rule,
        k=config.k,
        tau=config.tau,
        birth_term_set=config.birth_term_set,
        include_essential=config.include_essential,
    )
    weights = LossWeights(
        lambda_significant=config.lambda_significant,
        lambda_noise=config.lambda_noise,
        curriculum_start_iter=config.curriculum_start_iter,
    )
    return TrainConfig(
        arch=arch,
        iterations=config.iterations,
        batch_points=config.batch_points,
        batch_queries=config.batch_queries,
        optimizer=config.optimizer,
        base_lr=config.base_lr,
        warmup_iters=config.warmup_iters,
        topo=topo,
        weights=weights,
        seed=config.seed,
        init=config.init,
        init_radius=config.init_radius,
        sigma_k=config.sigma_k,
        sgd_noise_std=config.sgd_noise_std,
    )
