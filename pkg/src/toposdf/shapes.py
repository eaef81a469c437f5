"""Synthetic point clouds with exact signed-distance oracles.

Each generator draws area-uniform surface samples (optionally with isotropic
Gaussian noise) and pairs them with the closed-form signed distance of the
same shape, so reconstruction quality can be judged against ground truth
without any scanned data.
"""

from dataclasses import dataclass

import numpy as np

KINDS = ("sphere", "two_spheres", "torus", "thin_plate")


@dataclass
class ShapeSpec:
    """Parameters for one synthetic cloud.

    radius is the sphere radius, the radius of each of the two spheres, or
    the torus center-circle radius; minor_radius is the torus tube radius;
    gap is the closest distance between the two spheres; half_width and
    thickness bound the plate (full extents 2*half_width square by
    thickness).
    """

    kind: str
    radius: float = 0.5
    minor_radius: float = 0.15
    gap: float = 0.3
    half_width: float = 0.6
    thickness: float = 0.05
    count: int = 1000
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}, expected one of {KINDS}")
        for name in ("radius", "minor_radius", "half_width", "thickness"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.gap < 0.0:
            raise ValueError(f"gap must be non-negative, got {self.gap}")
        if self.count < 1:
            raise ValueError(f"count must be at least 1, got {self.count}")
        if self.noise_std < 0.0:
            raise ValueError(f"noise_std must be non-negative, got {self.noise_std}")


def _sphere_centers(spec):
    offset = spec.radius + 0.5 * spec.gap
    return np.array([[-offset, 0.0, 0.0], [offset, 0.0, 0.0]])


def _unit_directions(rng, count):
    d = rng.normal(size=(count, 3))
    return d / np.linalg.norm(d, axis=1)[:, None]


def _sample_sphere(spec, rng):
    return _unit_directions(rng, spec.count) * spec.radius


def _sample_two_spheres(spec, rng):
    centers = _sphere_centers(spec)
    # both spheres have the same area, so a fair coin keeps sampling uniform
    side = rng.integers(0, 2, size=spec.count)
    return centers[side] + _unit_directions(rng, spec.count) * spec.radius


def _sample_torus(spec, rng):
    R, r = spec.radius, spec.minor_radius
    out = np.empty((spec.count, 3))
    filled = 0
    while filled < spec.count:
        n = max(spec.count - filled, 64) * 2
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        phi = rng.uniform(0.0, 2.0 * np.pi, n)
        # surface element scales with R + r*cos(phi); thin the tube-angle
        # draws accordingly so samples are area-uniform
        keep = rng.uniform(0.0, 1.0, n) <= (R + r * np.cos(phi)) / (R + r)
        theta, phi = theta[keep], phi[keep]
        take = min(len(theta), spec.count - filled)
        ring = R + r * np.cos(phi[:take])
        out[filled:filled + take, 0] = ring * np.cos(theta[:take])
        out[filled:filled + take, 1] = ring * np.sin(theta[:take])
        out[filled:filled + take, 2] = r * np.sin(phi[:take])
        filled += take
    return out


_FACE_AXES = np.array([2, 2, 0, 0, 1, 1])
_FACE_SIGNS = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])


def _sample_thin_plate(spec, rng):
    half = np.array([spec.half_width, spec.half_width, 0.5 * spec.thickness])
    areas = np.empty(6)
    for f in range(6):
        u_axis, v_axis = [a for a in range(3) if a != _FACE_AXES[f]]
        areas[f] = 4.0 * half[u_axis] * half[v_axis]
    face = rng.choice(6, size=spec.count, p=areas / areas.sum())
    pts = rng.uniform(-1.0, 1.0, (spec.count, 3)) * half
    pts[np.arange(spec.count), _FACE_AXES[face]] = (
        _FACE_SIGNS[face] * half[_FACE_AXES[face]]
    )
    return pts


def _sdf_sphere(points, center, radius):
    return np.linalg.norm(points - center, axis=-1) - radius


def _sdf_torus(points, R, r):
    ring = np.sqrt(points[..., 0] ** 2 + points[..., 1] ** 2) - R
    return np.sqrt(ring**2 + points[..., 2] ** 2) - r


def _sdf_box(points, half):
    q = np.abs(points) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(np.max(q, axis=-1), 0.0)
    return outside + inside


def analytic_sdf(spec, points):
    """Exact signed distance of the described shape.

    Accepts a single (3,) point or an (n, 3) batch; returns a float or an
    (n,) array to match.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (3,) or (n, 3) points, got {np.shape(points)}")
    if spec.kind == "sphere":
        d = _sdf_sphere(pts, np.zeros(3), spec.radius)
    elif spec.kind == "two_spheres":
        centers = _sphere_centers(spec)
        d = np.minimum(
            _sdf_sphere(pts, centers[0], spec.radius),
            _sdf_sphere(pts, centers[1], spec.radius),
        )
    elif spec.kind == "torus":
        d = _sdf_torus(pts, spec.radius, spec.minor_radius)
    else:
        half = np.array([spec.half_width, spec.half_width, 0.5 * spec.thickness])
        d = _sdf_box(pts, half)
    return float(d[0]) if single else d


_SAMPLERS = {
    "sphere": _sample_sphere,
    "two_spheres": _sample_two_spheres,
    "torus": _sample_torus,
    "thin_plate": _sample_thin_plate,
}


def generate(spec):
    """Surface samples plus the matching exact-SDF handle.

    Returns (points, sdf) where points is (count, 3) and sdf maps query
    points to exact signed distances of the noise-free shape.  Deterministic
    per spec.seed; noise_std adds isotropic Gaussian jitter after sampling.
    """
    rng = np.random.default_rng(spec.seed)
    points = _SAMPLERS[spec.kind](spec, rng)
    if spec.noise_std > 0.0:
        points = points + rng.normal(0.0, spec.noise_std, points.shape)
    return points, lambda q: analytic_sdf(spec, q)
