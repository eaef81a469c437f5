"""Synthetic generators: zero-set membership, exact-SDF agreement with a
dense sampling oracle, area-uniformity, and determinism."""

import numpy as np
import pytest
from scipy import stats

from toposdf.shapes import KINDS, ShapeSpec, analytic_sdf, generate


def dense_cloud(kind, count, **params):
    points, _ = generate(ShapeSpec(kind, count=count, seed=9, **params))
    return points


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            ShapeSpec("cube")

    @pytest.mark.parametrize(
        "field,value",
        [
            ("radius", 0.0),
            ("minor_radius", -0.1),
            ("half_width", 0.0),
            ("thickness", -1.0),
            ("gap", -0.01),
            ("count", 0),
            ("noise_std", -0.5),
        ],
    )
    def test_bad_numbers(self, field, value):
        with pytest.raises(ValueError, match=field):
            ShapeSpec("sphere", **{field: value})


class TestZeroSet:
    @pytest.mark.parametrize("kind", KINDS)
    def test_noiseless_points_lie_on_surface(self, kind):
        spec = ShapeSpec(kind, count=2000, seed=1)
        points, sdf = generate(spec)
        assert np.max(np.abs(sdf(points))) < 1e-12

    def test_sphere_radii_within_noise(self):
        sigma = 0.01
        spec = ShapeSpec("sphere", count=1000, noise_std=sigma, seed=2)
        points, _ = generate(spec)
        assert np.max(np.abs(np.linalg.norm(points, axis=1) - 0.5)) <= 4 * sigma

    @pytest.mark.parametrize("sigma", [0.0, 0.005])
    def test_two_spheres_keep_their_gap(self, sigma):
        gap = 0.3
        spec = ShapeSpec(
            "two_spheres", radius=0.25, gap=gap, count=1500, noise_std=sigma, seed=3
        )
        points, _ = generate(spec)
        left = points[points[:, 0] < 0.0]
        right = points[points[:, 0] >= 0.0]
        cross = np.linalg.norm(left[:, None, :] - right[None, :, :], axis=2)
        assert cross.min() >= gap - 8 * sigma


class TestAnalyticSdf:
    def test_sphere_center(self):
        assert analytic_sdf(ShapeSpec("sphere"), np.zeros(3)) == -0.5

    def test_torus_landmarks(self):
        spec = ShapeSpec("torus", radius=0.5, minor_radius=0.15)
        assert analytic_sdf(spec, np.zeros(3)) == pytest.approx(0.35, abs=1e-15)
        assert analytic_sdf(spec, np.array([0.5, 0.0, 0.0])) == pytest.approx(
            -0.15, abs=1e-15
        )

    def test_plate_center_depth(self):
        spec = ShapeSpec("thin_plate", thickness=0.05)
        assert analytic_sdf(spec, np.zeros(3)) == pytest.approx(-0.025, abs=1e-15)

    def test_two_spheres_midpoint_positive(self):
        spec = ShapeSpec("two_spheres", radius=0.25, gap=0.3)
        assert analytic_sdf(spec, np.zeros(3)) == pytest.approx(0.15, abs=1e-15)

    def test_single_point_matches_batch(self):
        spec = ShapeSpec("torus")
        pts = np.random.default_rng(0).uniform(-1, 1, (10, 3))
        batch = analytic_sdf(spec, pts)
        for i in range(10):
            one = analytic_sdf(spec, pts[i])
            assert isinstance(one, float)
            assert one == batch[i]

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            analytic_sdf(ShapeSpec("sphere"), np.zeros((2, 2)))

    @pytest.mark.parametrize("kind", KINDS)
    def test_magnitude_matches_dense_sampling(self, kind):
        surface = dense_cloud(kind, 1_000_000)
        rng = np.random.default_rng(11)
        queries = rng.uniform(-0.9, 0.9, (20, 3))
        spec = ShapeSpec(kind)
        d = analytic_sdf(spec, queries)
        for i in range(20):
            nearest = np.sqrt(
                np.min(np.sum((surface - queries[i]) ** 2, axis=1))
            )
            assert abs(abs(d[i]) - nearest) < 2e-3


class TestAreaUniformity:
    def test_sphere_equal_area_slices(self):
        points, _ = generate(ShapeSpec("sphere", count=100_000, seed=5))
        # equal z-slices of a sphere have equal area
        counts, _ = np.histogram(points[:, 2], bins=20, range=(-0.5, 0.5))
        assert stats.chisquare(counts).pvalue > 0.01

    def test_two_spheres_split_evenly(self):
        points, _ = generate(
            ShapeSpec("two_spheres", radius=0.25, gap=0.3, count=100_000, seed=5)
        )
        n_left = int(np.sum(points[:, 0] < 0.0))
        counts = [n_left, len(points) - n_left]
        assert stats.chisquare(counts).pvalue > 0.01

    def test_torus_tube_angle_density(self):
        R, r = 0.5, 0.15
        points, _ = generate(
            ShapeSpec("torus", radius=R, minor_radius=r, count=100_000, seed=5)
        )
        ring = np.sqrt(points[:, 0] ** 2 + points[:, 1] ** 2) - R
        phi = np.arctan2(points[:, 2] / r, ring / r)
        edges = np.linspace(-np.pi, np.pi, 25)
        counts, _ = np.histogram(phi, bins=edges)
        # area density along the tube angle is proportional to R + r*cos(phi)
        mass = R * np.diff(edges) + r * (np.sin(edges[1:]) - np.sin(edges[:-1]))
        expected = mass / mass.sum() * counts.sum()
        assert stats.chisquare(counts, expected).pvalue > 0.01

    def test_plate_faces_by_area(self):
        hw, t = 0.6, 0.05
        points, _ = generate(
            ShapeSpec(
                "thin_plate", half_width=hw, thickness=t, count=100_000, seed=5
            )
        )
        half = np.array([hw, hw, t / 2])
        on_face = np.isclose(np.abs(points), half, atol=1e-12)
        top_bottom = int(np.sum(on_face[:, 2]))
        sides = len(points) - top_bottom
        a_tb = 2 * (2 * hw) ** 2
        a_sides = 4 * (2 * hw) * t
        expected = (
            np.array([a_tb, a_sides]) / (a_tb + a_sides) * len(points)
        )
        assert stats.chisquare([top_bottom, sides], expected).pvalue > 0.01


class TestDeterminism:
    @pytest.mark.parametrize("kind", KINDS)
    def test_same_seed_same_cloud(self, kind):
        a, _ = generate(ShapeSpec(kind, count=500, noise_std=0.01, seed=7))
        b, _ = generate(ShapeSpec(kind, count=500, noise_std=0.01, seed=7))
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        a, _ = generate(ShapeSpec("sphere", count=100, seed=0))
        b, _ = generate(ShapeSpec("sphere", count=100, seed=1))
        assert not np.array_equal(a, b)

    def test_noise_perturbs(self):
        clean, _ = generate(ShapeSpec("sphere", count=400, seed=8))
        noisy, _ = generate(ShapeSpec("sphere", count=400, noise_std=0.02, seed=8))
        shift = np.linalg.norm(noisy - clean, axis=1)
        assert np.all(shift > 0.0)
        assert 0.01 < np.mean(shift) < 0.06
