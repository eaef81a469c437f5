"""Reverse-mode automatic differentiation over a flat tape of numpy arrays.

Every operation records a node holding its float64 result and a closure that
pushes an adjoint back to its parents.  ``backward`` sweeps the tape once in
reverse creation order, so gradients are deterministic: the same tape and seed
always produce bit-identical results.

External gradient contributions (sparse adjoints produced outside the tape,
e.g. routed through a persistence diagram) can be attached to any node with
``inject_external_gradient`` and are picked up by the next ``backward`` call.
"""

import numpy as np

from .errors import ShapeError

_NORM_FLOOR = 1e-12


class Var:
    """Handle to one tape node."""

    __slots__ = ("tape", "nid", "value")

    def __init__(self, tape, nid, value):
        self.tape = tape
        self.nid = nid
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(nid={self.nid}, shape={self.value.shape})"


class Tape:
    """Append-only operation record plus externally injected adjoints."""

    def __init__(self):
        self._values = []
        self._backs = []       # per node: None (leaf) or callable(adjoint, adj_map)
        self.injected = {}     # nid -> dense float64 adjoint array

    def __len__(self):
        return len(self._values)

    def _push(self, value, back):
        nid = len(self._values)
        self._values.append(value)
        self._backs.append(back)
        return Var(self, nid, value)

    def leaf(self, value):
        """Record an input node (parameter or constant)."""
        arr = np.ascontiguousarray(value, dtype=np.float64)
        return self._push(arr, None)


def _acc(adj, nid, delta):
    got = adj.get(nid)
    if got is None:
        adj[nid] = delta.copy() if isinstance(delta, np.ndarray) else np.asarray(delta)
    else:
        got += delta


def _same_tape(*vars_):
    tape = vars_[0].tape
    for v in vars_[1:]:
        if v.tape is not tape:
            raise ValueError("operands recorded on different tapes")
    return tape


def affine(x, w, b):
    """x @ w + b with b broadcast over rows."""
    tape = _same_tape(x, w, b)
    if x.value.ndim != 2 or w.value.ndim != 2 or b.value.ndim != 1:
        raise ShapeError(
            f"affine expects (n,p), (p,m), (m,), got {x.shape}, {w.shape}, {b.shape}"
        )
    if x.value.shape[1] != w.value.shape[0] or w.value.shape[1] != b.value.shape[0]:
        raise ShapeError(
            f"affine shape mismatch: input {x.shape} vs weight {w.shape} vs bias {b.shape}"
        )
    out = x.value @ w.value + b.value
    xv, wv = x.value, w.value
    xid, wid, bid = x.nid, w.nid, b.nid

    def back(g, adj):
        _acc(adj, xid, g @ wv.T)
        _acc(adj, wid, xv.T @ g)
        _acc(adj, bid, g.sum(axis=0))

    return tape._push(out, back)


def matmul(x, y):
    tape = _same_tape(x, y)
    if x.value.ndim != 2 or y.value.ndim != 2 or x.value.shape[1] != y.value.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {x.shape} @ {y.shape}")
    out = x.value @ y.value
    xv, yv, xid, yid = x.value, y.value, x.nid, y.nid

    def back(g, adj):
        _acc(adj, xid, g @ yv.T)
        _acc(adj, yid, xv.T @ g)

    return tape._push(out, back)


def relu(x):
    """max(x, 0); subgradient at 0 is 0."""
    mask = x.value > 0.0
    out = np.where(mask, x.value, 0.0)
    xid = x.nid

    def back(g, adj):
        _acc(adj, xid, g * mask)

    return x.tape._push(out, back)


def _binary(x, y, name):
    tape = _same_tape(x, y)
    if x.value.shape != y.value.shape:
        raise ShapeError(f"{name} shape mismatch: {x.shape} vs {y.shape}")
    return tape


def add(x, y):
    tape = _binary(x, y, "add")
    xid, yid = x.nid, y.nid

    def back(g, adj):
        _acc(adj, xid, g)
        _acc(adj, yid, g)

    return tape._push(x.value + y.value, back)


def sub(x, y):
    tape = _binary(x, y, "sub")
    xid, yid = x.nid, y.nid

    def back(g, adj):
        _acc(adj, xid, g)
        _acc(adj, yid, -g)

    return tape._push(x.value - y.value, back)


def mul(x, y):
    tape = _binary(x, y, "mul")
    xv, yv, xid, yid = x.value, y.value, x.nid, y.nid

    def back(g, adj):
        _acc(adj, xid, g * yv)
        _acc(adj, yid, g * xv)

    return tape._push(xv * yv, back)


def scale(x, c):
    """Multiply by a python float constant."""
    c = float(c)
    xid = x.nid

    def back(g, adj):
        _acc(adj, xid, g * c)

    return x.tape._push(x.value * c, back)


def square(x):
    xv, xid = x.value, x.nid

    def back(g, adj):
        _acc(adj, xid, g * (2.0 * xv))

    return x.tape._push(xv * xv, back)


def absolute(x):
    """|x|; subgradient at 0 is 0 (sign(0) == 0)."""
    sgn = np.sign(x.value)
    xid = x.nid

    def back(g, adj):
        _acc(adj, xid, g * sgn)

    return x.tape._push(np.abs(x.value), back)


def reduce_sum(x):
    shape, xid = x.value.shape, x.nid

    def back(g, adj):
        _acc(adj, xid, np.full(shape, float(g)))

    return x.tape._push(np.asarray(x.value.sum()), back)


def reduce_mean(x):
    shape, xid = x.value.shape, x.nid
    n = x.value.size

    def back(g, adj):
        _acc(adj, xid, np.full(shape, float(g) / n))

    return x.tape._push(np.asarray(x.value.mean()), back)


def l2_norm_rows(x):
    """Euclidean norm of each row of an (n, d) array."""
    from .errors import DegenerateInputError

    if x.value.ndim != 2:
        raise ShapeError(f"l2_norm_rows expects a 2-d array, got {x.shape}")
    norms = np.sqrt(np.sum(x.value * x.value, axis=1))
    if np.any(norms < _NORM_FLOOR):
        bad = int(np.argmin(norms))
        raise DegenerateInputError(
            f"row {bad} has norm {norms[bad]:.3e} below {_NORM_FLOOR:.0e}"
        )
    xv, xid = x.value, x.nid

    def back(g, adj):
        _acc(adj, xid, (g / norms)[:, None] * xv)

    return x.tape._push(norms, back)


def reciprocal(x):
    out = 1.0 / x.value
    xid = x.nid

    def back(g, adj):
        _acc(adj, xid, -g * out * out)

    return x.tape._push(out, back)


def colmul(mat, vec):
    """Scale row i of (n, m) ``mat`` by ``vec[i]``."""
    tape = _same_tape(mat, vec)
    if mat.value.ndim != 2 or vec.value.ndim != 1 or mat.value.shape[0] != vec.value.shape[0]:
        raise ShapeError(f"colmul shape mismatch: {mat.shape} vs {vec.shape}")
    mv, vv, mid, vid = mat.value, vec.value, mat.nid, vec.nid

    def back(g, adj):
        _acc(adj, mid, g * vv[:, None])
        _acc(adj, vid, np.sum(g * mv, axis=1))

    return tape._push(mv * vv[:, None], back)


def concat_cols(a, b):
    tape = _same_tape(a, b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[0] != b.value.shape[0]:
        raise ShapeError(f"concat_cols shape mismatch: {a.shape} vs {b.shape}")
    p = a.value.shape[1]
    aid, bid = a.nid, b.nid

    def back(g, adj):
        _acc(adj, aid, g[:, :p])
        _acc(adj, bid, g[:, p:])

    return tape._push(np.concatenate([a.value, b.value], axis=1), back)


def gather(x, indices):
    """Pick flat entries of x; duplicates accumulate on the way back."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.value.size):
        raise IndexError(f"gather index out of range for size {x.value.size}")
    shape, xid = x.value.shape, x.nid

    def back(g, adj):
        full = np.zeros(shape, dtype=np.float64)
        np.add.at(full.ravel(), idx, g)
        _acc(adj, xid, full)

    return x.tape._push(x.value.ravel()[idx], back)


def select_rows(x, indices):
    idx = np.asarray(indices, dtype=np.int64)
    if x.value.ndim != 2:
        raise ShapeError(f"select_rows expects a 2-d array, got {x.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.value.shape[0]):
        raise IndexError(f"select_rows index out of range for {x.value.shape[0]} rows")
    shape, xid = x.value.shape, x.nid

    def back(g, adj):
        full = np.zeros(shape, dtype=np.float64)
        np.add.at(full, idx, g)
        _acc(adj, xid, full)

    return x.tape._push(x.value[idx], back)


def reshape(x, shape):
    old, xid = x.value.shape, x.nid
    out = x.value.reshape(shape)

    def back(g, adj):
        _acc(adj, xid, g.reshape(old))

    return x.tape._push(out, back)


def inject_external_gradient(tape, var, entries):
    """Accumulate a sparse adjoint onto ``var`` ahead of the next backward call.

    ``entries`` is an iterable of (flat_index, value) pairs or a dict mapping
    flat index to value.  Repeated indices accumulate.
    """
    if var.tape is not tape:
        raise KeyError("node does not belong to this tape")
    if isinstance(entries, dict):
        entries = entries.items()
    buf = tape.injected.get(var.nid)
    if buf is None:
        buf = np.zeros(var.value.shape, dtype=np.float64)
        tape.injected[var.nid] = buf
    flat = buf.ravel()
    size = flat.shape[0]
    for i, v in entries:
        i = int(i)
        if i < 0 or i >= size:
            raise IndexError(f"injected index {i} out of range for size {size}")
        flat[i] += float(v)


def backward(tape, seed, seed_gradient=None):
    """Reverse sweep from ``seed``; returns {nid: gradient} for touched nodes.

    Injected adjoints participate as if they were upstream losses.  The tape is
    not mutated, so repeated calls give bit-identical maps.
    """
    if seed.tape is not tape:
        raise KeyError("seed node does not belong to this tape")
    if not (0 <= seed.nid < len(tape)):
        raise KeyError(f"unknown node id {seed.nid}")
    adj = {}
    for nid, arr in tape.injected.items():
        adj[nid] = arr.copy()
    if seed_gradient is None:
        seed_gradient = np.ones_like(seed.value)
    else:
        seed_gradient = np.asarray(seed_gradient, dtype=np.float64)
        if seed_gradient.shape != seed.value.shape:
            raise ShapeError(
                f"seed gradient shape {seed_gradient.shape} != node shape {seed.value.shape}"
            )
    _acc(adj, seed.nid, seed_gradient)
    backs = tape._backs
    for nid in range(len(backs) - 1, -1, -1):
        g = adj.get(nid)
        if g is None:
            continue
        back = backs[nid]
        if back is not None:
            back(g, adj)
    return adj
