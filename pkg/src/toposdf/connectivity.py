"""Finite-point-set connectivity predicates and randomized checks of the
density and separation theorems that motivate the connectivity losses.

Conventions chosen where the source definitions are ambiguous and recorded in
the docstrings: separation uses the standard packing inequality (every
distinct pair strictly farther than eps), and the shared connectivity beta of
a set is its maximum pairwise distance, which equals the maximum over all
k-subsets of their own diameters for any k >= 2.

Exact metric entropy is replaced by certified bounds: a greedy packing gives
a lower bound, a volume argument gives an upper bound, and the theorem checks
only claim trials they can actually decide, reporting the rest as undecided.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class FiniteSet3:
    """At least two points in R^3 with cached pairwise distances."""

    points: np.ndarray
    _pairwise: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError(f"expected (m, 3) points, got {self.points.shape}")
        if self.points.shape[0] < 2:
            raise ValueError("need at least two points")

    def __len__(self):
        return self.points.shape[0]

    def distance_matrix(self):
        diff = self.points[:, None, :] - self.points[None, :, :]
        return np.sqrt(np.sum(diff * diff, axis=2))

    def pairwise_distances(self):
        """Unordered pair distances (diagonal excluded), cached."""
        if self._pairwise is None:
            iu = np.triu_indices(len(self), k=1)
            self._pairwise = self.distance_matrix()[iu]
        return self._pairwise


def _as_set(points):
    return points if isinstance(points, FiniteSet3) else FiniteSet3(points)


def connectivity_bounds(points):
    """(alpha, beta): smallest and largest pairwise distance."""
    s = _as_set(points)
    d = s.pairwise_distances()
    return float(d.min()), float(d.max())


def subset_connectivity_beta(points, k):
    """Max over all k-subsets of each subset's own largest pairwise distance.

    For k >= 2 every pair lies in some subset, so this equals the set's beta;
    it exists to make that reading explicit and testable.
    """
    s = _as_set(points)
    if not 2 <= k <= len(s):
        raise ValueError(f"k must be in [2, {len(s)}], got {k}")
    dm = s.distance_matrix()
    best = 0.0
    for subset in itertools.combinations(range(len(s)), k):
        idx = np.array(subset)
        best = max(best, float(dm[np.ix_(idx, idx)].max()))
    return best


def is_m_eps_dense(points, m, eps):
    """True iff every point has at least m others within eps (inclusive)."""
    s = _as_set(points)
    if not 0 < m < len(s):
        raise ValueError(f"m must be in [1, {len(s) - 1}], got {m}")
    dm = s.distance_matrix()
    within = np.sum(dm <= eps, axis=1) - 1   # discount self
    return bool(np.all(within >= m))


def is_eps_separated(points, eps):
    """True iff every distinct pair is strictly farther apart than eps."""
    s = _as_set(points)
    return bool(np.all(s.pairwise_distances() > eps))


def _check_annulus(alpha, beta):
    if not (0.0 <= alpha <= beta) or beta <= 0.0:
        raise ValueError(f"invalid annulus radii ({alpha}, {beta})")


def annulus_samples(alpha, beta, count, rng):
    """Uniform draws from the origin-centered shell alpha <= |x| <= beta
    (uniform on the sphere when alpha == beta)."""
    _check_annulus(alpha, beta)
    dirs = rng.normal(size=(count, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    u = rng.random(count)
    radii = np.cbrt(alpha**3 + u * (beta**3 - alpha**3))
    return dirs * radii[:, None]


def greedy_annulus_packing(alpha, beta, eps, rng, candidates=256):
    """Greedy eps-separated subset of random annulus samples, in draw order."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    pts = annulus_samples(alpha, beta, candidates, rng)
    accepted = [pts[0]]
    for p in pts[1:]:
        d = np.linalg.norm(np.asarray(accepted) - p, axis=1)
        if np.all(d > eps):
            accepted.append(p)
    return np.asarray(accepted)


def metric_entropy_lower_bound(annulus, eps, trials=32, seed=0, candidates=256):
    """Largest eps-separated annulus packing found over several greedy rounds:
    a certified lower bound on the eps-metric entropy (exact maximization is
    out of scope)."""
    alpha, beta = annulus
    _check_annulus(alpha, beta)
    rng = np.random.default_rng(seed)
    best = 0
    for _ in range(trials):
        best = max(best, len(greedy_annulus_packing(alpha, beta, eps, rng,
                                                    candidates)))
    return best


def separation_upper_bound(beta, eps):
    """Volume bound on how many points separated by more than eps fit in a
    radius-beta ball: disjoint eps/2 balls inside radius beta + eps/2."""
    return math.ceil(((2.0 * beta + eps) / eps) ** 3)


def _check_mk(m, k):
    if m > 8:
        raise ValueError(
            f"m={m} exceeds the exhaustive-subset limit of 8"
        )
    if not 2 <= k <= m:
        raise ValueError(f"need 2 <= k <= m, got k={k}, m={m}")


def check_theorem2(m, k, trials=1000, seed=0):
    """Randomized density check: for uniform size-m sets in the unit cube
    with shared beta = max pairwise distance, every point must have at least
    m-k+1 others within beta.  Returns the number of counterexamples."""
    _check_mk(m, k)
    rng = np.random.default_rng(seed)
    counterexamples = 0
    for _ in range(trials):
        s = FiniteSet3(rng.random((m, 3)))
        _, beta = connectivity_bounds(s)
        if not is_m_eps_dense(s, m - k + 1, beta):
            counterexamples += 1
    return counterexamples


@dataclass
class Theorem3Report:
    trials: int
    verified: int
    undecided: int
    violations: int
    eps: float
    eps_relative: bool


def check_theorem3(m, k, eps, trials=500, seed=0, eps_relative=False):
    """Randomized separation check.

    A trial is decidable when m-k+1 exceeds the volume upper bound on the
    number of eps-separated points in the set's enclosing ball; the set must
    then fail eps-separation.  With eps_relative, eps scales with each trial's
    beta.  Undecided trials are reported, never counted as passes.
    """
    _check_mk(m, k)
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    rng = np.random.default_rng(seed)
    verified = undecided = violations = 0
    for _ in range(trials):
        s = FiniteSet3(rng.random((m, 3)))
        _, beta = connectivity_bounds(s)
        e = eps * beta if eps_relative else eps
        if m - k + 1 > separation_upper_bound(beta, e):
            if is_eps_separated(s, e):
                violations += 1
            else:
                verified += 1
        else:
            undecided += 1
    return Theorem3Report(trials, verified, undecided, violations, eps,
                          eps_relative)
