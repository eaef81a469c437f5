"""Grid evaluation and 0-dim persistence: hand-checked sweeps, a flood-fill
threshold oracle over random small grids, shift equivariance and determinism."""

import numpy as np
import pytest

from toposdf import autodiff as ad
from toposdf import filtration as fl
from toposdf.accel import python_impl
from toposdf.mlp import Architecture, SdfModel, init_geometric

from _oracles import sublevel_component_count


def constant_model(c):
    arch = Architecture(2, 4, 1)
    return SdfModel(
        arch,
        [np.zeros((3, 4)), np.zeros((7, 1))],
        [np.zeros(4), np.full(1, c)],
    )


def linear_x0_model():
    # relu(x0) - relu(-x0) == x0 exactly
    arch = Architecture(2, 4, 1)
    w0 = np.zeros((3, 4))
    w0[0, 0] = 1.0
    w0[0, 1] = -1.0
    w1 = np.zeros((7, 1))
    w1[0, 0] = 1.0
    w1[1, 0] = -1.0
    return SdfModel(arch, [w0, w1], [np.zeros(4), np.zeros(1)])


def test_scalar_grid_validation():
    with pytest.raises(ValueError):
        fl.ScalarGrid(np.zeros(7), (2, 2, 2))
    with pytest.raises(ValueError):
        fl.ScalarGrid(np.zeros(1), (1, 1, 1))
    with pytest.raises(ValueError):
        fl.ScalarGrid(np.full(8, np.nan), (2, 2, 2))
    g = fl.ScalarGrid(np.zeros(27), 3)
    assert g.resolution == (3, 3, 3)
    assert np.allclose(g.spacing, 1.0)


def test_eval_grid_constant_and_linear_models():
    ev = fl.eval_grid(constant_model(-0.25), 3)
    assert np.all(ev.grid.values == 0.25)
    assert np.all(ev.signs == -1.0)

    tape = ad.Tape()
    ev2 = fl.eval_grid(linear_x0_model(), 3, tape=tape)
    assert np.array_equal(
        ev2.grid.values, np.tile(np.array([1.0, 0.0, 1.0]), 9)
    )
    assert np.array_equal(ev2.signs, np.tile(np.array([-1.0, 0.0, 1.0]), 9))
    assert ev2.node is not None and ev2.node.value.shape == (27,)

    raw = fl.eval_grid(linear_x0_model(), 3, use_absolute=False)
    assert np.array_equal(raw.grid.values, np.tile(np.array([-1.0, 0.0, 1.0]), 9))
    assert np.all(raw.signs == 1.0)


def test_eval_grid_geometric_init_minimum_sits_on_its_sphere():
    model = init_geometric(Architecture(), radius=0.5, seed=0)
    ev = fl.eval_grid(model, 16)
    amin = int(np.argmin(ev.grid.values))
    r = np.linalg.norm(ev.grid.vertex_positions()[amin])
    assert abs(r - 0.5) < 1.5 * ev.grid.spacing[0]


def test_persistence_increasing_values_single_essential_bar():
    g = fl.ScalarGrid(np.arange(27, dtype=np.float64), 3)
    d = fl.persistence0(g)
    assert len(d.pairs) == 1
    p = d.pairs[0]
    assert p.essential and p.birth == 0.0 and p.death == 26.0
    assert p.birth_vertex == 0 and p.death_vertex == 26


def test_persistence_two_minima_hand_sweep():
    # 1-d profile [0, 2, 1, 3] replicated over a 4x2x2 grid
    vals = np.tile(np.array([0.0, 2.0, 1.0, 3.0]), 4)
    d = fl.persistence0(fl.ScalarGrid(vals, (4, 2, 2)))
    finite = d.finite_pairs()
    assert len(finite) == 1
    assert (finite[0].birth, finite[0].death) == (1.0, 2.0)
    assert (finite[0].birth_vertex, finite[0].death_vertex) == (2, 1)
    ess = d.essential_pair()
    assert (ess.birth, ess.death) == (0.0, 3.0)
    assert (ess.birth_vertex, ess.death_vertex) == (0, 15)


def test_persistence_value_ties_resolve_by_index():
    # profile [1, 1, 0]: the later value-1 component dies instantly
    vals = np.tile(np.array([1.0, 1.0, 0.0]), 4)
    d = fl.persistence0(fl.ScalarGrid(vals, (3, 2, 2)))
    finite = d.finite_pairs()
    assert len(finite) == 1
    assert finite[0].birth == finite[0].death == 1.0
    assert finite[0].birth_vertex != finite[0].death_vertex
    for p in d.pairs:
        assert p.death >= p.birth


def _threshold_counts_match(values, shape):
    grid = fl.ScalarGrid(values, shape)
    d = fl.persistence0(grid)
    ess = d.essential_pair()
    checkpoints = np.unique(values)
    mids = 0.5 * (checkpoints[1:] + checkpoints[:-1])
    for t in np.concatenate([checkpoints, mids]):
        want = sublevel_component_count(values, shape, t)
        got = sum(1 for p in d.finite_pairs() if p.birth <= t < p.death)
        got += 1 if t >= ess.birth else 0
        if want != got:
            return False, t, want, got
    return True, None, None, None


def test_persistence_matches_flood_fill_on_random_grids():
    rng = np.random.default_rng(11)
    shapes = [(2, 2, 2), (3, 3, 3), (4, 4, 4), (4, 3, 2), (2, 4, 3)]
    for trial in range(200):
        shape = shapes[trial % len(shapes)]
        n = shape[0] * shape[1] * shape[2]
        values = rng.permutation(n).astype(np.float64)  # distinct
        ok, t, want, got = _threshold_counts_match(values, shape)
        assert ok, f"trial {trial} shape {shape} t={t}: flood fill {want} vs diagram {got}"


def test_persistence_matches_flood_fill_with_ties():
    rng = np.random.default_rng(12)
    for trial in range(60):
        values = rng.integers(0, 4, 27).astype(np.float64)
        ok, t, want, got = _threshold_counts_match(values, (3, 3, 3))
        assert ok, f"trial {trial} t={t}: flood fill {want} vs diagram {got}"


def test_monotone_shift_moves_births_and_deaths_only():
    rng = np.random.default_rng(13)
    values = np.round(rng.uniform(0, 1, 64), 3)
    values += np.arange(64) * 1e-9  # keep values distinct
    d0 = fl.persistence0(fl.ScalarGrid(values, 4))
    c = 0.375  # exactly representable, so shifts are bit-exact
    d1 = fl.persistence0(fl.ScalarGrid(values + c, 4))
    assert len(d0.pairs) == len(d1.pairs)
    for p0, p1 in zip(d0.pairs, d1.pairs):
        assert p1.birth == p0.birth + c
        assert p1.death == p0.death + c
        assert (p1.birth_vertex, p1.death_vertex) == (p0.birth_vertex, p0.death_vertex)
        assert p1.essential == p0.essential


def test_persistence_deterministic_and_fallback_equivalent():
    rng = np.random.default_rng(14)
    values = rng.uniform(-1, 1, 125)
    g = fl.ScalarGrid(values, 5)
    d1 = fl.persistence0(g)
    d2 = fl.persistence0(g)
    as_tuples = lambda d: [
        (p.birth, p.death, p.birth_vertex, p.death_vertex, p.essential) for p in d.pairs
    ]
    assert as_tuples(d1) == as_tuples(d2)

    order = np.argsort(values, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    bv = np.empty(125, dtype=np.int64)
    dv = np.empty(125, dtype=np.int64)
    count = python_impl(fl._sweep)(order, rank, 5, 5, 5, bv, dv)
    finite = d1.finite_pairs()
    assert count == len(finite)
    assert [p.birth_vertex for p in finite] == bv[:count].tolist()
    assert [p.death_vertex for p in finite] == dv[:count].tolist()


def test_total_persistence():
    vals = np.tile(np.array([0.0, 2.0, 1.0, 3.0]), 4)
    d = fl.persistence0(fl.ScalarGrid(vals, (4, 2, 2)))
    assert fl.diagram_total_persistence(d) == 1.0
    inc = fl.persistence0(fl.ScalarGrid(np.arange(8, dtype=np.float64), 2))
    assert fl.diagram_total_persistence(inc) == 0.0

    # on a random grid the total equals the sum over flood-fill-derived bars:
    # integrate component count over thresholds and subtract the essential bar
    rng = np.random.default_rng(15)
    values = rng.permutation(27).astype(np.float64)
    d3 = fl.persistence0(fl.ScalarGrid(values, 3))
    levels = np.sort(values)
    riemann = 0.0
    for a, b in zip(levels[:-1], levels[1:]):
        riemann += sublevel_component_count(values, (3, 3, 3), a) * (b - a)
    essential_span = levels[-1] - levels[0]
    assert np.isclose(fl.diagram_total_persistence(d3), riemann - essential_span)
