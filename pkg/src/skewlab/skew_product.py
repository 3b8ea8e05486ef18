"""Rotation extensions F(x, theta) = (f(x), theta + phi(x)) on M x S^1.

The fiber coordinate theta is an angle in turns, reduced mod 1.  States are
either FiberedPoint values (base array + theta) or, for batch work, raw
arrays of shape (n, d+1) with the fiber angle in the last column.  The
derivative is block triangular: the base block on top, a zero column over
the fiber, and (grad phi, 1) in the bottom row, so the fiber action is an
isometry and det dF = det(base matrix) everywhere.
"""

from __future__ import annotations

import numpy as np

from .base_dynamics import wrap, torus_dist, circle_dist


class FiberedPoint:
    """Point (base, theta) of M x S^1 with theta in [0, 1) turns."""

    __slots__ = ("base", "theta")

    def __init__(self, base, theta):
        self.base = wrap(np.atleast_1d(np.asarray(base, dtype=float)))
        self.theta = float(theta) % 1.0

    def as_state(self):
        """Flat array (x..., theta) of shape (d+1,)."""
        return np.concatenate([self.base, [self.theta]])

    @classmethod
    def from_state(cls, state):
        state = np.asarray(state, dtype=float)
        return cls(state[:-1], state[-1])

    def __repr__(self):
        return f"FiberedPoint({self.base.tolist()}, {self.theta})"


def fibered_dist(p, q):
    """Sup of base torus distance and fiber circle distance."""
    return max(torus_dist(p.base, q.base), circle_dist(p.theta, q.theta))


class RotationExtension:
    """Skew product over a base endomorphism with a bump-driven fiber rotation.

    bump=None gives the product map (phi identically zero), the integrable
    control case for every diagnostic in this package.
    """

    def __init__(self, base_map, bump=None):
        self.base_map = base_map
        self.bump = bump
        if bump is not None and bump.dim != base_map.dim:
            raise ValueError("bump dimension does not match the base map")
        self.dim = base_map.dim + 1
        self.degree = base_map.degree

    def phi(self, base_point):
        if self.bump is None:
            return 0.0
        return self.bump.value(base_point)

    def phi_batch(self, bases):
        bases = np.asarray(bases, dtype=float)
        if self.bump is None:
            return np.zeros(bases.shape[0])
        return self.bump.value_batch(bases)

    def phi_grad(self, base_point):
        if self.bump is None:
            return np.zeros(self.base_map.dim)
        return self.bump.grad(base_point)

    def apply(self, p):
        """One step of the skew product on a FiberedPoint."""
        return FiberedPoint(self.base_map.apply(p.base), p.theta + self.phi(p.base))

    def apply_n(self, p, n):
        for _ in range(n):
            p = self.apply(p)
        return p

    def step_batch(self, states):
        """One step on an (n, d+1) state array."""
        states = np.asarray(states, dtype=float)
        d = self.base_map.dim
        out = np.empty_like(states)
        out[:, :d] = self.base_map.apply_batch(states[:, :d])
        out[:, d] = (states[:, d] + self.phi_batch(states[:, :d])) % 1.0
        return out

    def lift_apply(self, v):
        """Lift to the cover R^d x R: no reduction, phi read off the torus."""
        v = np.asarray(v, dtype=float)
        d = self.base_map.dim
        base = self.base_map.matrix @ v[:d]
        theta = v[d] + self.phi(wrap(v[:d]))
        return np.concatenate([base, [theta]])

    def derivative(self, p):
        """Analytic derivative at p (FiberedPoint or bare base point).

        Independent of theta; block triangular with bottom row
        (grad phi, 1).
        """
        base = p.base if isinstance(p, FiberedPoint) else np.atleast_1d(np.asarray(p, dtype=float))
        d = self.base_map.dim
        J = np.zeros((d + 1, d + 1))
        J[:d, :d] = self.base_map.matrix
        J[d, :d] = self.phi_grad(base)
        J[d, d] = 1.0
        return J

    def derivative_batch(self, bases):
        """(n, d+1, d+1) stack of derivatives over an (n, d) base batch."""
        bases = np.asarray(bases, dtype=float)
        n = bases.shape[0]
        d = self.base_map.dim
        J = np.zeros((n, d + 1, d + 1))
        J[:, :d, :d] = self.base_map.matrix
        if self.bump is not None:
            J[:, d, :d] = self.bump.grad_batch(bases)
        J[:, d, d] = 1.0
        return J

    def derivative_inverse(self, p):
        """Analytic inverse of derivative(p): [[B, 0], [-g B, 1]] with B = base inverse."""
        base = p.base if isinstance(p, FiberedPoint) else np.atleast_1d(np.asarray(p, dtype=float))
        d = self.base_map.dim
        J = np.zeros((d + 1, d + 1))
        B = self.base_map.inverse
        J[:d, :d] = B
        J[d, :d] = -(self.phi_grad(base) @ B)
        J[d, d] = 1.0
        return J

    def derivative_inverse_batch(self, bases):
        """(n, d+1, d+1) stack of analytic derivative inverses."""
        bases = np.asarray(bases, dtype=float)
        n = bases.shape[0]
        d = self.base_map.dim
        J = np.zeros((n, d + 1, d + 1))
        B = self.base_map.inverse
        J[:, :d, :d] = B
        if self.bump is not None:
            J[:, d, :d] = -(self.bump.grad_batch(bases) @ B)
        J[:, d, d] = 1.0
        return J

    def preimages(self, p):
        """All degree-many F-preimages, ordered by base preimage order."""
        out = []
        for q in self.base_map.preimages(p.base):
            out.append(FiberedPoint(q, p.theta - self.phi(q)))
        return out

    def __repr__(self):
        tag = "product" if self.bump is None else repr(self.bump)
        return f"RotationExtension({self.base_map!r}, {tag})"


def iterate_base(base_map, start, n):
    """(n+1, d) array of base iterates start, f(start), ..., f^n(start)."""
    start = np.atleast_1d(np.asarray(start, dtype=float))
    out = np.empty((n + 1, start.shape[0]))
    out[0] = start % 1.0
    M = base_map.matrix
    cur = out[0]
    for k in range(1, n + 1):
        cur = (M @ cur) % 1.0
        out[k] = cur
    return out


def vertical_rotate(alpha, p):
    """Fiber rotation G_alpha(x, theta) = (x, theta + alpha)."""
    return FiberedPoint(p.base, p.theta + float(alpha))


def jacobian_sum_check(F, p):
    """Sum of 1/|det dF| over the preimages of p; equals 1 for volume preservation."""
    total = 0.0
    for q in F.preimages(p):
        total += 1.0 / abs(np.linalg.det(F.derivative(q)))
    return total
