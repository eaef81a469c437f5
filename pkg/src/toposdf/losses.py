"""Training losses: query pulling plus connectivity terms on a persistence
diagram, with gradients routed back onto the field grid.

The pulling loss moves each query to its nearest surface point along the
normalized field gradient; everything stays on the tape, so parameters feel
both the field value and the direction.

The connectivity terms split the diagram into significant and noise features.
Significant bars are rewarded for persisting (L_S = -sum of their lengths);
noise bars are charged for being born and for persisting (L_N = sum of births
plus lengths, i.e. their deaths).  Both are piecewise linear in the grid
values, so their exact gradient is a handful of +/-lambda coefficients at the
critical vertices of each bar; ``topo_backward`` multiplies those by the
recorded field sign (chain rule through the absolute-value filtration) and
injects them at the grid node.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .cloud import KdTree, nearest_surface_point
from .errors import ConsistencyError, DegenerateInputError
from .filtration import DEFAULT_DOMAIN, eval_grid, persistence0
from .mlp import SdfModel, forward_with_gradient

_GRAD_FLOOR = 1e-12


@dataclass
class LossWeights:
    """Term weights; connectivity terms switch on at curriculum_start_iter."""

    lambda_significant: float = 0.5
    lambda_noise: float = 5.0
    curriculum_start_iter: int = 0


@dataclass
class TopoConfig:
    """How the field is filtered, partitioned and charged."""

    grid_resolution: int = 16
    domain: tuple = DEFAULT_DOMAIN
    use_absolute: bool = True
    partition_rule: str = "top_k"   # "top_k" | "threshold"
    k: int = 1
    tau: float = 0.01
    birth_term_set: str = "noise"   # which set pays the birth charge
    include_essential: bool = True

    def __post_init__(self):
        if self.partition_rule not in ("top_k", "threshold"):
            raise ValueError(f"unknown partition rule {self.partition_rule!r}")
        if self.birth_term_set not in ("noise", "significant"):
            raise ValueError(f"unknown birth term set {self.birth_term_set!r}")


@dataclass
class FeaturePartition:
    """Indices into diagram.pairs."""

    significant: list
    noise: list


@dataclass
class PulledBatch:
    points: object        # (m, 3) tape Var of pulled locations
    kept: np.ndarray      # indices of surviving queries
    dropped: int


@dataclass
class LossBreakdown:
    total: float
    pull: float
    significant: float    # raw L_S (unweighted)
    noise: float          # raw L_N (unweighted)
    dropped: int
    diagram: object       # PersistenceDiagram or None before curriculum start
    pull_node: object     # scalar tape Var to seed backward with


def _field_with_gradient(field, points, tape):
    if isinstance(field, SdfModel):
        return forward_with_gradient(field, points, tape)
    return field(points, tape)


def pulled_location(field, queries, tape):
    """Move each query against the normalized field gradient by the field
    value: c = q - f(q) * grad f(q) / |grad f(q)|, recorded on tape.

    Queries where the gradient vanishes (norm below 1e-12) are dropped; if
    none survive, the batch is degenerate.
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    values, grad = _field_with_gradient(field, queries, tape)
    norms = np.sqrt(np.sum(grad.value * grad.value, axis=1))
    kept = np.flatnonzero(norms >= _GRAD_FLOOR)
    dropped = queries.shape[0] - kept.size
    if kept.size == 0:
        raise DegenerateInputError(
            f"all {queries.shape[0]} queries dropped: field gradient vanished"
        )
    if dropped:
        values = ad.gather(values, kept)
        grad = ad.select_rows(grad, kept)
    unit = ad.colmul(grad, ad.reciprocal(ad.l2_norm_rows(grad)))
    step = ad.colmul(unit, values)
    q_leaf = tape.leaf(queries[kept])
    return PulledBatch(ad.sub(q_leaf, step), kept, dropped)


def pull_loss(pulled, targets, tape):
    """Mean squared distance between pulled locations and their targets."""
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    m = targets.shape[0]
    if m == 0:
        raise DegenerateInputError("empty batch: no query/target pairs")
    if pulled.value.shape != targets.shape:
        raise ConsistencyError(
            f"pulled {pulled.value.shape} vs targets {targets.shape}"
        )
    diff = ad.sub(pulled, tape.leaf(targets))
    return ad.scale(ad.reduce_sum(ad.square(diff)), 1.0 / m)


# ---------------------------------------------------------------------------
# diagram partition and the connectivity terms


def _pair_pool(diagram, cfg):
    if cfg.include_essential:
        return list(range(len(diagram.pairs)))
    return [i for i, p in enumerate(diagram.pairs) if not p.essential]


def partition_features(diagram, cfg):
    """Split pairs into significant and noise sets.

    top_k keeps the k most persistent (ties broken toward the lower birth
    vertex); threshold keeps everything with persistence > tau.
    """
    pool = _pair_pool(diagram, cfg)
    pairs = diagram.pairs
    if cfg.partition_rule == "top_k":
        ranked = sorted(pool, key=lambda i: (-pairs[i].persistence, pairs[i].birth_vertex))
        sig = sorted(ranked[: max(cfg.k, 0)])
        noise = sorted(ranked[max(cfg.k, 0):])
    else:
        sig = [i for i in pool if pairs[i].persistence > cfg.tau]
        noise = [i for i in pool if pairs[i].persistence <= cfg.tau]
    return FeaturePartition(sig, noise)


def loss_significant(diagram, partition, birth_term_set="noise"):
    """-sum of significant persistences; plus their births when the birth
    charge is assigned to the significant set."""
    total = 0.0
    for i in partition.significant:
        p = diagram.pairs[i]
        total -= p.death - p.birth
        if birth_term_set == "significant":
            total += p.birth
    return float(total)


def loss_noise(diagram, partition, birth_term_set="noise"):
    """Noise persistences, plus noise births under the default charging."""
    total = 0.0
    for i in partition.noise:
        p = diagram.pairs[i]
        total += p.death - p.birth
        if birth_term_set == "noise":
            total += p.birth
    return float(total)


def topo_gradient(diagram, partition, weights, birth_term_set="noise"):
    """Exact gradient of lambda_s * L_S + lambda_n * L_N on the filtration
    values, as {vertex index: coefficient}.

    Each bar contributes only at its two critical vertices.  Canceling terms
    (a noise bar's birth charge against its persistence) are accumulated
    explicitly rather than algebraically removed.
    """
    ls, ln = float(weights.lambda_significant), float(weights.lambda_noise)
    out = {}

    def acc(v, c):
        out[v] = out.get(v, 0.0) + c

    for i in partition.significant:
        p = diagram.pairs[i]
        acc(p.birth_vertex, ls)        # d(-(d-b))/db = +1
        acc(p.death_vertex, -ls)       # d(-(d-b))/dd = -1
        if birth_term_set == "significant":
            acc(p.birth_vertex, ls)    # birth charge
    for i in partition.noise:
        p = diagram.pairs[i]
        acc(p.birth_vertex, -ln)       # d(d-b)/db = -1
        acc(p.death_vertex, ln)        # d(d-b)/dd = +1
        if birth_term_set == "noise":
            acc(p.birth_vertex, ln)    # birth charge, cancels the line above
    return out


def topo_backward(grid_eval, diagram, partition, weights, tape,
                  birth_term_set="noise"):
    """Inject the connectivity-loss gradient at the grid's tape node.

    Coefficients land on the raw field values, so each is multiplied by the
    recorded sign of f at its vertex (the absolute-value chain rule; signs
    are all one for a raw filtration).
    """
    if grid_eval.node is None:
        raise ConsistencyError("grid was evaluated off-tape; nothing to inject into")
    if diagram.grid_resolution != grid_eval.grid.resolution:
        raise ConsistencyError(
            f"diagram resolution {diagram.grid_resolution} != grid resolution "
            f"{grid_eval.grid.resolution}"
        )
    expected = "absolute" if grid_eval.use_absolute else "raw"
    if diagram.filtration != expected:
        raise ConsistencyError(
            f"diagram filtration {diagram.filtration!r} != grid filtration {expected!r}"
        )
    coeffs = topo_gradient(diagram, partition, weights, birth_term_set)
    signs = grid_eval.signs
    entries = [(v, c * signs[v]) for v, c in coeffs.items()]
    ad.inject_external_gradient(tape, grid_eval.node, entries)
    return coeffs


# ---------------------------------------------------------------------------
# the combined objective


def unified_loss(model, cloud, queries, topo_cfg, weights, iteration, tape,
                 index=None):
    """Pull loss plus (after curriculum start) the weighted connectivity
    terms; topological gradients are injected so one backward pass from
    ``pull_node`` yields the full parameter gradient.

    With both lambdas zero the connectivity machinery is skipped entirely and
    the result is bit-identical to pull-only training.
    """
    pb = pulled_location(model, queries.queries, tape)
    if index is None:
        index = KdTree(cloud.points)
    targets, _ = nearest_surface_point(index, queries.queries[pb.kept])
    lg = pull_loss(pb.points, targets, tape)
    pull_value = float(lg.value)

    topo_on = (
        iteration >= weights.curriculum_start_iter
        and (weights.lambda_significant != 0.0 or weights.lambda_noise != 0.0)
    )
    if not topo_on:
        return LossBreakdown(pull_value, pull_value, 0.0, 0.0, pb.dropped, None, lg)

    ev = eval_grid(
        model, topo_cfg.grid_resolution, topo_cfg.domain, tape,
        topo_cfg.use_absolute,
    )
    diagram = persistence0(ev.grid, "absolute" if topo_cfg.use_absolute else "raw")
    part = partition_features(diagram, topo_cfg)
    ls = loss_significant(diagram, part, topo_cfg.birth_term_set)
    ln = loss_noise(diagram, part, topo_cfg.birth_term_set)
    topo_backward(ev, diagram, part, weights, tape, topo_cfg.birth_term_set)
    total = (
        pull_value
        + weights.lambda_significant * ls
        + weights.lambda_noise * ln
    )
    return LossBreakdown(total, pull_value, ls, ln, pb.dropped, diagram, lg)
