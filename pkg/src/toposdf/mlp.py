"""ReLU MLP over 3-d points with one raw-input skip concatenation.

Two initializers are provided: a sphere-like geometric start (the field of an
untrained network approximates distance to a sphere of the requested radius)
and plain Kaiming normal.  Forward passes can run on a tape (trainable) or as
plain numpy (evaluation).  ``forward_with_gradient`` additionally carries the
spatial gradient on the tape via per-axis tangent propagation, with the ReLU
activation masks treated as locally constant, so losses built from the
normalized field direction differentiate back into the parameters.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ShapeError


@dataclass
class Architecture:
    """Layer plan: ``layer_count`` affine maps, ReLU between, one skip."""

    layer_count: int = 8
    hidden_width: int = 256
    skip_layer: int = 4
    input_dim: int = 3
    output_dim: int = 1

    def __post_init__(self):
        if self.layer_count < 2:
            raise ValueError(f"layer_count must be >= 2, got {self.layer_count}")
        if not (0 < self.skip_layer < self.layer_count):
            raise ValueError(
                f"skip_layer must lie strictly inside (0, {self.layer_count}), "
                f"got {self.skip_layer}"
            )
        if min(self.hidden_width, self.input_dim, self.output_dim) < 1:
            raise ValueError("widths must be positive")

    def layer_shapes(self):
        """[(in, out)] per affine layer, skip concatenation included."""
        shapes = []
        for i in range(self.layer_count):
            fan_in = self.input_dim if i == 0 else self.hidden_width
            if i == self.skip_layer:
                fan_in += self.input_dim
            fan_out = (
                self.output_dim if i == self.layer_count - 1 else self.hidden_width
            )
            shapes.append((fan_in, fan_out))
        return shapes

    def param_count(self):
        return sum(i * o + o for i, o in self.layer_shapes())


@dataclass
class SdfModel:
    """Architecture plus parameter arrays (weights[i]: (in, out), biases[i]: (out,))."""

    arch: Architecture
    weights: list
    biases: list
    init_descriptor: dict = field(default_factory=dict)

    def parameters(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def bind(self, tape):
        """Leaf nodes for all parameters, created once per tape and cached so
        repeated forwards on one tape accumulate into the same leaves."""
        cache = getattr(tape, "_bindings", None)
        if cache is None:
            cache = {}
            tape._bindings = cache
        key = id(self)
        bound = cache.get(key)
        if bound is None:
            ws = [tape.leaf(w) for w in self.weights]
            bs = [tape.leaf(b) for b in self.biases]
            bound = (ws, bs)
            cache[key] = bound
        return bound


class _BadPoints(ShapeError):
    pass


def _check_points(points, dim):
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != dim:
        raise _BadPoints(f"expected (n, {dim}) points, got {points.shape}")
    return points


def init_geometric(arch, radius=0.5, seed=0):
    """Sphere-like start: f(x) is approximately |x| - radius.

    Hidden weights are Normal(0, sqrt(2/width)); the final layer is drawn
    tightly around sqrt(pi)/sqrt(fan_in) with bias -radius; the raw-input rows
    of the skip layer start at zero.
    """
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    shapes = arch.layer_shapes()
    for i, (fan_in, fan_out) in enumerate(shapes):
        if i == arch.layer_count - 1:
            w = rng.normal(np.sqrt(np.pi) / np.sqrt(fan_in), 1e-5, (fan_in, fan_out))
            b = np.full(fan_out, -float(radius))
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / fan_out), (fan_in, fan_out))
            if i == arch.skip_layer:
                w[-arch.input_dim:, :] = 0.0
            b = np.zeros(fan_out)
        weights.append(w)
        biases.append(b)
    return SdfModel(
        arch,
        weights,
        biases,
        {"scheme": "geometric", "radius": float(radius), "seed": int(seed)},
    )


def init_standard(arch, seed=0):
    """Kaiming-normal weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in arch.layer_shapes():
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return SdfModel(
        arch, weights, biases, {"scheme": "standard", "radius": 0.0, "seed": int(seed)}
    )


def _forward_tape(model, points, tape):
    arch = model.arch
    points = _check_points(points, arch.input_dim)
    ws, bs = model.bind(tape)
    x = tape.leaf(points)
    h = x
    for i in range(arch.layer_count):
        inp = ad.concat_cols(h, x) if i == arch.skip_layer else h
        z = ad.affine(inp, ws[i], bs[i])
        h = ad.relu(z) if i < arch.layer_count - 1 else z
    return ad.reshape(h, (points.shape[0],)), x


def sdf_forward(model, points, tape):
    """Field values at ``points`` as an (n,) tape node."""
    values, _ = _forward_tape(model, points, tape)
    return values


def forward_values(model, points, chunk=65536):
    """Plain numpy forward (no tape) for evaluation-only callers."""
    arch = model.arch
    points = _check_points(points, arch.input_dim)
    outs = []
    for lo in range(0, points.shape[0], chunk):
        x = points[lo:lo + chunk]
        h = x
        for i in range(arch.layer_count):
            inp = np.concatenate([h, x], axis=1) if i == arch.skip_layer else h
            z = inp @ model.weights[i] + model.biases[i]
            h = np.maximum(z, 0.0) if i < arch.layer_count - 1 else z
        outs.append(h[:, 0])
    return np.concatenate(outs) if outs else np.zeros(0)


def forward_with_gradient(model, points, tape):
    """(values (n,), spatial gradient (n, 3)) both recorded on the tape.

    The gradient is propagated per axis: tangent t0 = e_axis, then through
    each layer t -> (t @ W) * mask with the same masks as the value pass.
    Parameters receive exact almost-everywhere derivatives through both the
    value path and the tangent path.
    """
    arch = model.arch
    points = _check_points(points, arch.input_dim)
    n = points.shape[0]
    ws, bs = model.bind(tape)
    x = tape.leaf(points)

    h = x
    masks = []
    for i in range(arch.layer_count):
        inp = ad.concat_cols(h, x) if i == arch.skip_layer else h
        z = ad.affine(inp, ws[i], bs[i])
        if i < arch.layer_count - 1:
            masks.append(tape.leaf((z.value > 0.0).astype(np.float64)))
            h = ad.relu(z)
        else:
            h = z
    values = ad.reshape(h, (n,))

    cols = []
    for axis in range(arch.input_dim):
        e = np.zeros((n, arch.input_dim))
        e[:, axis] = 1.0
        e_leaf = tape.leaf(e)
        t = e_leaf
        for i in range(arch.layer_count):
            tin = ad.concat_cols(t, e_leaf) if i == arch.skip_layer else t
            tz = ad.matmul(tin, ws[i])
            t = ad.mul(tz, masks[i]) if i < arch.layer_count - 1 else tz
        cols.append(t)
    grad = cols[0]
    for c in cols[1:]:
        grad = ad.concat_cols(grad, c)
    return values, grad


def spatial_gradient(model, points):
    """Exact reverse-mode gradient of the field at each point, off-tape."""
    points = _check_points(points, model.arch.input_dim)
    tape = ad.Tape()
    values, x = _forward_tape(model, points, tape)
    grads = ad.backward(tape, values, np.ones(points.shape[0]))
    return grads[x.nid]


__all__ = [
    "Architecture",
    "SdfModel",
    "init_geometric",
    "init_standard",
    "sdf_forward",
    "forward_values",
    "forward_with_gradient",
    "spatial_gradient",
]
