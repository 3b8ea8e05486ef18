"""Finite preorbits, branch itineraries, shadowing, and the truncated
orbit-space metric.

A preorbit is one backward branch of the non-invertible dynamics: points
x_{-1}, ..., x_{-N} with F(x_{-k}) = x_{-k+1} and x_0 the anchor.  Branch
indices refer to F.preimages(...) in its canonical order (lexicographic on
base coordinates), so itineraries are reproducible across runs.  Shadowing
transports a preorbit to a nearby anchor by selecting, at each depth, the
preimage branch closest to the reference point; the displacement is
propagated in base eigencoordinates, where each mode scales by a fixed
factor per pullback, so long shadows do not accumulate roundoff in the
expanding (backward) mode.
"""

from __future__ import annotations

import numpy as np

from .base_dynamics import wrap, wrapped_delta, torus_dist
from .errors import PolicyInfeasible, ShadowBreakdown
from .skew_product import FiberedPoint, fibered_dist

AMBIGUITY_TOL = 1e-9


class Preorbit:
    """Backward branch x_0 (anchor), x_{-1}, ..., x_{-depth} of F."""

    def __init__(self, F, anchor, branches, points):
        if len(branches) != len(points):
            raise ValueError("branches and points must have equal length")
        self.F = F
        self.anchor = anchor
        self.branches = list(branches)
        self.points = list(points)

    @property
    def depth(self):
        return len(self.points)

    def point_at(self, k):
        """x_{-k}; k = 0 is the anchor."""
        if k == 0:
            return self.anchor
        return self.points[k - 1]

    def base_at(self, k):
        return self.point_at(k).base

    def bases(self):
        """(depth+1, d) array of bases, anchor first."""
        return np.array([self.anchor.base] + [p.base for p in self.points])

    def tail(self, k):
        """The preorbit re-anchored at x_{-k} (shares realized points)."""
        if not 0 <= k <= self.depth:
            raise ValueError("tail index out of range")
        return Preorbit(self.F, self.point_at(k), self.branches[k:], self.points[k:])

    def extended_by_image(self):
        """Preorbit of F(anchor) whose first backward point is the anchor."""
        image = self.F.apply(self.anchor)
        pres = self.F.preimages(image)
        dists = [torus_dist(q.base, self.anchor.base) for q in pres]
        idx = int(np.argmin(dists))
        if dists[idx] > 1e-9:
            raise ArithmeticError("anchor not found among preimages of its image")
        return Preorbit(self.F, image, [idx] + self.branches, [self.anchor] + self.points)

    def itinerary(self):
        return "".join(str(b) for b in self.branches)

    def max_residual(self):
        """Largest re-application defect dist(F(x_{-k}), x_{-k+1})."""
        worst = 0.0
        for k in range(self.depth, 0, -1):
            img = self.F.apply(self.point_at(k))
            worst = max(worst, fibered_dist(img, self.point_at(k - 1)))
        return worst

    def __repr__(self):
        return f"Preorbit(depth={self.depth}, itinerary={self.itinerary()!r})"


class UniformRandom:
    """Branch policy: independent uniform branch choice from a seeded stream."""

    def __init__(self, seed):
        self.seed = seed

    def start(self):
        return np.random.default_rng(self.seed)

    def choose(self, rng, k, candidates):
        return int(rng.integers(len(candidates)))


class FixedItinerary:
    """Branch policy: a prescribed branch index (or sequence of indices)."""

    def __init__(self, branches):
        if np.isscalar(branches):
            self.branches = None
            self.constant = int(branches)
        else:
            self.branches = [int(b) for b in branches]
            self.constant = None

    def start(self):
        return None

    def choose(self, rng, k, candidates):
        if self.branches is None:
            return self.constant
        if k - 1 >= len(self.branches):
            raise PolicyInfeasible(f"itinerary exhausted at depth {k}")
        return self.branches[k - 1]


class StayOutside:
    """Branch policy: depth 1 takes the first canonical branch; every deeper
    point must have base outside the given region.

    region is a callable base -> bool (True meaning inside the excluded set),
    or an object with an in_support method (a bump function).
    """

    def __init__(self, region):
        if callable(region):
            self.inside = region
        else:
            self.inside = region.in_support

    def start(self):
        return None

    def choose(self, rng, k, candidates):
        if k == 1:
            return 0
        for i, q in enumerate(candidates):
            if not self.inside(q.base):
                return i
        raise PolicyInfeasible(f"no preimage outside the region at depth {k}")


def sample_preorbit(F, anchor, depth, policy):
    """Realize a depth-N preorbit of anchor under the given branch policy."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    rng = policy.start()
    branches = []
    points = []
    cur = anchor
    for k in range(1, depth + 1):
        candidates = F.preimages(cur)
        idx = policy.choose(rng, k, candidates)
        if not 0 <= idx < len(candidates):
            raise PolicyInfeasible(f"branch index {idx} out of range at depth {k}")
        cur = candidates[idx]
        branches.append(idx)
        points.append(cur)
    return Preorbit(F, anchor, branches, points)


def _eigen_modes(base_map, delta):
    """Coefficients of delta in the eigenbasis and the backward mode factors.

    Returns (coeffs, factors, vectors): after k pullbacks the displacement is
    sum_i coeffs[i] * factors[i]**k * vectors[i].
    """
    if base_map.dim == 1:
        return (
            np.array([float(delta[0])]),
            np.array([1.0 / base_map.multiplier]),
            np.array([[1.0]]),
        )
    eig = base_map.eigen
    V = np.column_stack([eig.v_s, eig.v_u])
    coeffs = np.linalg.solve(V, np.asarray(delta, dtype=float))
    return coeffs, np.array([1.0 / eig.a_s, 1.0 / eig.a_u]), V.T


def shadow_displacements(base_map, delta, depth):
    """(depth, d) array of backward displacements A^{-k} delta, k = 1..depth,
    propagated mode by mode so no mode is ever multiplied through another."""
    coeffs, factors, vectors = _eigen_modes(base_map, delta)
    k = np.arange(1, depth + 1)[:, None]
    scales = coeffs[None, :] * factors[None, :] ** k
    return scales @ vectors


def shadow_preorbit(F, ref, q):
    """Preorbit of q following, at each depth, the branch nearest ref.

    The displacement from the reference anchor is pulled back in
    eigencoordinates; a step where two preimage branches are equidistant
    within 1e-9, or where the displacement leaves the local branch chart,
    raises ShadowBreakdown.
    """
    base_map = F.base_map
    sep = base_map.branch_separation()
    delta0 = wrapped_delta(q.base, ref.anchor.base)
    if np.max(np.abs(delta0)) > 0.5:
        raise ShadowBreakdown("query is not in the chart of the reference anchor")
    deltas = shadow_displacements(base_map, delta0, ref.depth)
    kernel = base_map.kernel_translates()
    branches = []
    points = []
    theta = q.theta
    for k in range(1, ref.depth + 1):
        d = deltas[k - 1]
        # the preimage branches of the running point sit at ref + d + kernel
        cand = [wrapped_delta(d + kappa, np.zeros_like(d)) for kappa in kernel]
        dists = np.array([np.max(np.abs(c)) for c in cand])
        order = np.argsort(dists)
        if dists[order[0]] >= sep / 2:
            raise ShadowBreakdown(f"shadow left the branch chart at depth {k}")
        if len(order) > 1 and dists[order[1]] - dists[order[0]] < AMBIGUITY_TOL:
            raise ShadowBreakdown(f"ambiguous branch choice at depth {k}")
        if order[0] != 0:
            raise ShadowBreakdown(f"shadow jumped to a different branch at depth {k}")
        base = wrap(ref.base_at(k) + d)
        theta = (theta - F.phi(base)) % 1.0
        points.append(FiberedPoint(base, theta))
        branches.append(_branch_index(F, points[-1], points[-2] if k > 1 else q))
    return Preorbit(F, q, branches, points)


def _branch_index(F, pre_point, image_point):
    """Index of pre_point among the canonical preimages of image_point."""
    pres = F.base_map.preimages(image_point.base)
    dists = [torus_dist(b, pre_point.base) for b in pres]
    idx = int(np.argmin(dists))
    if dists[idx] > 1e-8:
        raise ShadowBreakdown("realized shadow point is not a preimage branch")
    return idx


class OrbitSegment:
    """Contiguous run of orbit points x_lo, ..., x_hi with lo <= 0 <= hi."""

    def __init__(self, points, lo=0):
        self.points = list(points)
        self.lo = int(lo)
        if not self.lo <= 0 <= self.hi:
            raise ValueError("segment must contain index 0")

    @property
    def hi(self):
        return self.lo + len(self.points) - 1

    @classmethod
    def from_orbit(cls, F, start, forward_steps, preorbit=None):
        pts = [start]
        cur = start
        for _ in range(forward_steps):
            cur = F.apply(cur)
            pts.append(cur)
        if preorbit is None:
            return cls(pts, 0)
        back = list(reversed(preorbit.points))
        return cls(back + pts, -preorbit.depth)

    def point_at(self, i):
        if not self.lo <= i <= self.hi:
            raise ValueError(f"index {i} outside [{self.lo}, {self.hi}]")
        return self.points[i - self.lo]

    def covers(self, n):
        return self.lo <= -n and self.hi >= n


def shift(segment):
    """Reindex so the new index-i point is the old index-(i+1) point."""
    if segment.hi < 1:
        raise ValueError("shift needs at least two forward points")
    return OrbitSegment(segment.points, segment.lo - 1)


def unshift(segment):
    """Inverse of shift; needs a backward point to become the new index 0."""
    if segment.lo > -1:
        raise ValueError("unshift needs at least one backward point")
    return OrbitSegment(segment.points, segment.lo + 1)


def inverse_limit_distance(a, b, N):
    """Truncated orbit-space metric sum_{|i|<=N} dist(a_i, b_i) / 2^|i|."""
    if not (a.covers(N) and b.covers(N)):
        raise ValueError(f"both segments must cover indices -{N}..{N}")
    total = 0.0
    for i in range(-N, N + 1):
        total += fibered_dist(a.point_at(i), b.point_at(i)) / 2.0 ** abs(i)
    return total


def distance_tail_bound(N):
    """Bound on the dropped tail: diam(M x S^1) * 2^(1-N), sup metric."""
    return 0.5 * 2.0 ** (1 - N)
