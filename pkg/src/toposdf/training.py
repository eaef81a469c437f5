"""Optimization loop: Adam with warmup+cosine decay (the default recipe) or
Robbins-Monro SGD (step sizes c/(1+t), optionally noisy) for studying
convergence behaviour, plus trailing-window convergence telemetry.

Runs are bit-reproducible per seed on a single thread: the master seed is
split into independent child streams for initialization, batch/query
sampling, and SGD noise, and the connectivity terms consume no randomness, so
histories are invariant to the loss weights until the curriculum starts.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .cloud import KdTree, PointCloud, per_point_sigma, sample_queries
from .errors import ConsistencyError, TrainingDiverged
from .losses import LossWeights, TopoConfig, unified_loss
from .mlp import Architecture, init_geometric, init_standard


@dataclass
class TrainConfig:
    arch: Architecture = field(default_factory=Architecture)
    iterations: int = 40000
    batch_points: int = 20000
    batch_queries: int = 4096
    optimizer: str = "adam"            # "adam" | "sgd_robbins_monro"
    base_lr: float = 0.001
    warmup_iters: int = 1000
    topo: TopoConfig = field(default_factory=TopoConfig)
    weights: LossWeights = field(default_factory=lambda: LossWeights(0.5, 5.0, 39500))
    seed: int = 0
    init: str = "geometric"            # "geometric" | "standard"
    init_radius: float = 0.5
    sigma_k: int = 50
    sgd_noise_std: float = 0.0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd_robbins_monro"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.init not in ("geometric", "standard"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.iterations <= self.warmup_iters:
            raise ValueError(
                f"iterations ({self.iterations}) must exceed warmup_iters "
                f"({self.warmup_iters})"
            )
        if self.batch_queries < 1:
            raise ValueError("batch_queries must be >= 1")
        if self.weights.curriculum_start_iter > self.iterations:
            raise ValueError(
                f"curriculum_start_iter ({self.weights.curriculum_start_iter}) "
                f"exceeds iterations ({self.iterations})"
            )

    @classmethod
    def desk_preset(cls, seed=0, **overrides):
        """Small-budget profile: 4x64 net, 5000 iterations, connectivity
        terms on an 8^3 grid over the last 500.

        The noise weight is far below the full-scale default because Adam
        renormalizes per-coordinate: any weight that dominates the pull
        gradients (roughly 1e-2 here) steers the update direction outright
        and dents the surface at the noise bars' saddles, regardless of its
        magnitude.  0.01 sits at the crossover: spurious bars still shrink,
        geometry is preserved.  The significant weight stays zero at this
        grid scale -- with one expected component the top bar is the
        never-dying one, so a nonzero weight only inflates the field range
        at the domain corners, which queries never visit.
        """
        base = dict(
            arch=Architecture(layer_count=4, hidden_width=64, skip_layer=2),
            iterations=5000,
            batch_points=2000,
            batch_queries=1000,
            topo=TopoConfig(grid_resolution=8),
            weights=LossWeights(0.0, 0.01, 4500),
            seed=seed,
        )
        base.update(overrides)
        return cls(**base)


@dataclass
class TrainHistory:
    """One row per completed iteration; totals are pull + weighted terms."""

    iters: np.ndarray
    total: np.ndarray
    pull: np.ndarray
    significant: np.ndarray
    noise: np.ndarray
    lr: np.ndarray
    dropped: np.ndarray
    snapshots: list = field(default_factory=list)   # (iter, diagram)

    def __len__(self):
        return len(self.iters)

    def rows(self):
        for i in range(len(self.iters)):
            yield (int(self.iters[i]), float(self.total[i]), float(self.pull[i]),
                   float(self.significant[i]), float(self.noise[i]),
                   float(self.lr[i]), int(self.dropped[i]))


def lr_schedule(config, iteration):
    """Step size at an iteration: flat warmup then cosine decay for adam;
    base_lr/(1+t) for the Robbins-Monro mode (not summable, square
    summable)."""
    if not 0 <= iteration < config.iterations:
        raise ValueError(
            f"iteration {iteration} outside [0, {config.iterations})"
        )
    if config.optimizer == "sgd_robbins_monro":
        return config.base_lr / (1.0 + iteration)
    if iteration < config.warmup_iters:
        return config.base_lr
    span = config.iterations - config.warmup_iters
    phase = math.pi * (iteration - config.warmup_iters) / span
    return config.base_lr * 0.5 * (1.0 + math.cos(phase))


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_model(cls, model):
        params = model.parameters()
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params])


_B1, _B2, _EPS = 0.9, 0.999, 1e-8


def adam_step(model, grads, state, lr):
    """Bias-corrected Adam update, in place on the model arrays."""
    params = model.parameters()
    if len(grads) != len(params):
        raise ConsistencyError(
            f"{len(grads)} gradients for {len(params)} parameters"
        )
    state.t += 1
    c1 = 1.0 - _B1 ** state.t
    c2 = 1.0 - _B2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ConsistencyError(
                f"gradient shape {g.shape} != parameter shape {p.shape}"
            )
        m *= _B1
        m += (1.0 - _B1) * g
        v *= _B2
        v += (1.0 - _B2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + _EPS)


def sgd_step(model, grads, lr, noise_std=0.0, rng=None):
    """theta <- theta - lr * (grad + zeta), zeta ~ N(0, noise_std) per entry."""
    params = model.parameters()
    if len(grads) != len(params):
        raise ConsistencyError(
            f"{len(grads)} gradients for {len(params)} parameters"
        )
    for p, g in zip(params, grads):
        if g.shape != p.shape:
            raise ConsistencyError(
                f"gradient shape {g.shape} != parameter shape {p.shape}"
            )
        step = g
        if noise_std > 0.0:
            step = g + rng.normal(scale=noise_std, size=p.shape)
        p -= lr * step


def _parameter_grads(model, tape, adjoints):
    ws, bs = tape._bindings[id(model)]
    grads = []
    for w, b in zip(ws, bs):
        gw = adjoints.get(w.nid)
        gb = adjoints.get(b.nid)
        grads.append(np.zeros(w.value.shape) if gw is None else gw)
        grads.append(np.zeros(b.value.shape) if gb is None else gb)
    return grads


def train(cloud, config, snapshot_stride=0):
    """Fit a field to the cloud; returns (model, history).

    Each iteration samples Gaussian queries around (a batch of) the cloud,
    pulls them toward their nearest cloud point, and after the curriculum
    start also evaluates the field grid and injects the connectivity-term
    gradients.  Aborts with diagnostics if the loss turns non-finite.
    """
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(np.asarray(cloud, dtype=np.float64), 1.0, np.zeros(3))
    n = cloud.points.shape[0]
    init_seed, sample_seed, noise_seed = (
        int(s)
        for s in np.random.SeedSequence(config.seed).generate_state(3, dtype=np.uint64)
    )
    if config.init == "geometric":
        model = init_geometric(config.arch, config.init_radius, init_seed)
    else:
        model = init_standard(config.arch, init_seed)

    index = KdTree(cloud.points)
    sigmas = per_point_sigma(index, k=min(config.sigma_k, n - 1))
    rng_sample = np.random.default_rng(sample_seed)
    rng_noise = np.random.default_rng(noise_seed)
    adam = AdamState.for_model(model) if config.optimizer == "adam" else None

    total = np.empty(config.iterations)
    pull = np.empty(config.iterations)
    sig = np.empty(config.iterations)
    noi = np.empty(config.iterations)
    lrs = np.empty(config.iterations)
    dropped = np.empty(config.iterations, dtype=np.int64)
    snapshots = []

    for it in range(config.iterations):
        anchor_pool = None
        if n > config.batch_points:
            anchor_pool = rng_sample.choice(n, size=config.batch_points,
                                            replace=False)
        batch = sample_queries(cloud, sigmas, config.batch_queries,
                               rng_sample, anchor_pool=anchor_pool)
        tape = ad.Tape()
        model.bind(tape)
        bd = unified_loss(model, cloud, batch, config.topo, config.weights,
                          it, tape, index=index)
        if not math.isfinite(bd.total):
            raise TrainingDiverged(
                f"non-finite loss at iteration {it}: total={bd.total}, "
                f"pull={bd.pull}, significant={bd.significant}, "
                f"noise={bd.noise}"
            )
        adjoints = ad.backward(tape, bd.pull_node)
        grads = _parameter_grads(model, tape, adjoints)
        lr = lr_schedule(config, it)
        if config.optimizer == "adam":
            adam_step(model, grads, adam, lr)
        else:
            sgd_step(model, grads, lr, config.sgd_noise_std, rng_noise)

        total[it] = bd.total
        pull[it] = bd.pull
        sig[it] = bd.significant
        noi[it] = bd.noise
        lrs[it] = lr
        dropped[it] = bd.dropped
        if (snapshot_stride and bd.diagram is not None
                and it % snapshot_stride == 0):
            snapshots.append((it, bd.diagram))

    history = TrainHistory(np.arange(config.iterations), total, pull, sig,
                           noi, lrs, dropped, snapshots)
    return model, history


@dataclass
class ConvergenceReport:
    slope: float
    converged: bool
    window: int


def convergence_report(history, window=500, slope_tol=1e-6):
    """Least-squares slope of the trailing loss window; converged when the
    loss is not increasing by more than slope_tol per iteration."""
    totals = history.total if isinstance(history, TrainHistory) else np.asarray(history)
    if len(totals) < 2 * window:
        raise ValueError(
            f"history of length {len(totals)} is too short for window {window}"
        )
    tail = np.asarray(totals[-window:], dtype=np.float64)
    x = np.arange(window, dtype=np.float64)
    slope = float(np.polyfit(x, tail, 1)[0])
    return ConvergenceReport(slope, slope <= slope_tol, window)
