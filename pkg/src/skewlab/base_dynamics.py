"""Base dynamics on the torus and the circle.

Points on T^d = R^d/Z^d are float arrays of shape (d,) with coordinates in
[0, 1); batches are arrays of shape (n, d).  Distances use the sup metric
over coordinate-wise circle distances.  The two families of base maps are
integer-matrix endomorphisms of T^2 and expanding maps x -> k*x of the
circle; both report their degree, their expansion data, and the full set of
preimages of a point.  The compactly supported bump used to drive the fiber
rotation also lives here.
"""

from __future__ import annotations

import numpy as np

from .errors import NotHyperbolic

# Margin used when rejecting eigenvalues too close to the unit circle.
UNIT_MODULUS_MARGIN = 1e-9

# Constructor-checked bound: sup|phi| and sup|grad phi| must stay below
# C1_MULTIPLE * amplitude.
C1_MULTIPLE = 3.0


def wrap(p):
    """Reduce coordinates to the fundamental domain [0, 1)."""
    return np.asarray(p, dtype=float) % 1.0


def wrapped_delta(p, q):
    """Shortest representative of p - q, each coordinate in [-1/2, 1/2)."""
    return (np.asarray(p, dtype=float) - np.asarray(q, dtype=float) + 0.5) % 1.0 - 0.5


def torus_dist(p, q):
    """Sup metric over coordinate-wise circle distances."""
    return float(np.max(np.abs(wrapped_delta(p, q))))


def circle_dist(a, b):
    """Distance on R/Z between two scalars."""
    d = (float(a) - float(b) + 0.5) % 1.0 - 0.5
    return abs(d)


class EigenData:
    """Real eigen-split of a hyperbolic 2x2 integer matrix.

    a_s, a_u are the contracting/expanding eigenvalues (|a_s| < 1 < |a_u|),
    v_s, v_u the corresponding unit eigenvectors with a canonical sign
    (largest-magnitude component positive).
    """

    def __init__(self, a_s, a_u, v_s, v_u):
        self.a_s = float(a_s)
        self.a_u = float(a_u)
        self.v_s = np.asarray(v_s, dtype=float)
        self.v_u = np.asarray(v_u, dtype=float)

    def __repr__(self):
        return f"EigenData(a_s={self.a_s:.6f}, a_u={self.a_u:.6f})"


def canonical_direction(v):
    """Flip sign so the largest-magnitude component is positive."""
    v = np.asarray(v, dtype=float)
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v.copy()


class LinearToralEndomorphism:
    """Map p -> M p (mod 1) on T^2 for an integer matrix M with |det| >= 1.

    The matrix must be hyperbolic: two real eigenvalues with moduli bounded
    away from 1.  Degree equals |det M|; every point has exactly that many
    preimages, which differ by translations in the kernel subgroup
    ker(M mod 1).
    """

    dim = 2

    def __init__(self, entries):
        m = np.asarray(entries, dtype=float)
        if m.shape != (2, 2) or not np.all(m == np.round(m)):
            raise ValueError("entries must form a 2x2 integer matrix")
        self.matrix = np.round(m).astype(float)
        det = self.matrix[0, 0] * self.matrix[1, 1] - self.matrix[0, 1] * self.matrix[1, 0]
        if det == 0:
            raise ValueError("matrix must be invertible over Q")
        self.det = float(det)
        self.degree = int(round(abs(det)))
        # adj(M)/det, exact up to float rounding of small integers
        adj = np.array(
            [[self.matrix[1, 1], -self.matrix[0, 1]],
             [-self.matrix[1, 0], self.matrix[0, 0]]]
        )
        self.inverse = adj / det
        self.eigen = self._eigen_split()
        self._kernel = None

    def _eigen_split(self):
        vals, vecs = np.linalg.eig(self.matrix)
        if np.max(np.abs(vals.imag)) > 1e-12:
            raise NotHyperbolic(f"complex eigenvalues {vals}")
        vals = vals.real
        vecs = vecs.real
        mods = np.abs(vals)
        if np.any(np.abs(mods - 1.0) < UNIT_MODULUS_MARGIN):
            raise NotHyperbolic(f"eigenvalue modulus too close to 1: {vals}")
        if not (mods.min() < 1.0 < mods.max()):
            raise NotHyperbolic(f"no contracting/expanding split: {vals}")
        i_s = int(np.argmin(mods))
        i_u = 1 - i_s
        v_s = canonical_direction(vecs[:, i_s] / np.linalg.norm(vecs[:, i_s]))
        v_u = canonical_direction(vecs[:, i_u] / np.linalg.norm(vecs[:, i_u]))
        return EigenData(vals[i_s], vals[i_u], v_s, v_u)

    def apply(self, p):
        """Image of a single point, shape (2,)."""
        return wrap(self.matrix @ np.asarray(p, dtype=float))

    def apply_batch(self, pts):
        """Image of an (n, 2) batch."""
        return (np.asarray(pts, dtype=float) @ self.matrix.T) % 1.0

    def kernel_translates(self):
        """Wrapped representatives of ker(M mod 1), zero first."""
        if self._kernel is None:
            ker = sorted({tuple(np.round(q, 12) % 1.0) for q in self._scan_preimages(np.zeros(2))})
            ker.sort(key=lambda t: (t != (0.0, 0.0), t))
            if len(ker) != self.degree:
                raise ArithmeticError(
                    f"kernel scan found {len(ker)} classes, expected {self.degree}"
                )
            self._kernel = [np.array(t) for t in ker]
        return self._kernel

    def _scan_preimages(self, p):
        """Brute-force preimage enumeration: solve M q = p + k over integer
        offsets k covering the image of the fundamental domain, dedup mod 1."""
        p = wrap(p)
        corners = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float) @ self.matrix.T
        lo = np.floor(corners.min(axis=0)).astype(int) - 1
        hi = np.ceil(corners.max(axis=0)).astype(int) + 1
        found = []
        for kx in range(lo[0], hi[0] + 1):
            for ky in range(lo[1], hi[1] + 1):
                q = wrap(self.inverse @ (p + np.array([kx, ky], dtype=float)))
                if torus_dist(self.apply(q), p) > 1e-10:
                    continue
                if all(torus_dist(q, r) > 1e-9 for r in found):
                    found.append(q)
        return found

    def preimages(self, p):
        """All degree-many preimages of p, sorted lexicographically by base.

        The preimage set is the coset { M^{-1} p + k : k in ker(M mod 1) },
        so one inverse solve plus the cached kernel translates enumerates it.
        """
        q0 = wrap(self.inverse @ wrap(p))
        found = [wrap(q0 + k) for k in self.kernel_translates()]
        found.sort(key=lambda q: (q[0], q[1]))
        return found

    def branch_separation(self):
        """Minimal distance between distinct preimages of any point.

        Preimages differ by kernel translates, so this is the minimal sup
        distance of a nonzero kernel element from 0; it does not depend on
        the point.
        """
        ker = self.kernel_translates()
        if len(ker) < 2:
            return float("inf")
        return min(torus_dist(k, np.zeros(2)) for k in ker[1:])

    def __repr__(self):
        rows = self.matrix.astype(int).tolist()
        return f"LinearToralEndomorphism({rows})"


class ExpandingCircleMap:
    """x -> k*x (mod 1) on the circle for an integer |k| >= 2.

    Points are arrays of shape (1,) so that the torus and circle cases share
    one vector interface.
    """

    dim = 1

    def __init__(self, multiplier):
        k = int(multiplier)
        if abs(k) < 2:
            raise ValueError("multiplier must satisfy |k| >= 2")
        self.multiplier = k
        self.matrix = np.array([[float(k)]])
        self.det = float(k)
        self.degree = abs(k)
        self.inverse = np.array([[1.0 / k]])
        self.eigen = EigenData(a_s=0.0, a_u=float(k), v_s=np.zeros(1), v_u=np.ones(1))
        # no contracting direction; a_s/v_s are placeholders never used

    def apply(self, p):
        return wrap(self.multiplier * np.asarray(p, dtype=float))

    def apply_batch(self, pts):
        return (np.asarray(pts, dtype=float) * self.multiplier) % 1.0

    def preimages(self, p):
        x = float(wrap(p)[0])
        qs = [np.array([((x + j) / self.multiplier) % 1.0]) for j in range(self.degree)]
        qs.sort(key=lambda q: q[0])
        return qs

    def kernel_translates(self):
        return [np.array([j / self.degree]) for j in range(self.degree)]

    def branch_separation(self):
        return 1.0 / self.degree

    def __repr__(self):
        return f"ExpandingCircleMap({self.multiplier})"


def _beta(t):
    """exp(1 - 1/(1-t)) on [0, 1), zero for t >= 1; smooth on all of R+."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = t < 1.0 - 1e-14
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti))
    return out


def _beta_prime(t):
    """Derivative of _beta: -beta(t)/(1-t)^2 inside the support."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = t < 1.0 - 1e-14
    ti = t[inside]
    out[inside] = -np.exp(1.0 - 1.0 / (1.0 - ti)) / (1.0 - ti) ** 2
    return out


class BumpFunction:
    """Compactly supported fiber driver phi: T^d -> R (output in turns).

    phi(q) = amplitude * beta(|q - center|^2 / radius^2) * ((q - center) . direction)

    with beta(t) = exp(1 - 1/(1-t)) on [0, 1) and 0 beyond, displacements
    taken in the nearest fundamental-domain representative.  phi vanishes at
    the center and outside the Euclidean ball of the given radius, and its
    gradient at the center is exactly amplitude * direction.  The constructor
    verifies the C1 norm stays below C1_MULTIPLE * amplitude on a sample grid.
    """

    def __init__(self, center, radius, amplitude, direction):
        self.center = wrap(np.atleast_1d(np.asarray(center, dtype=float)))
        self.dim = self.center.shape[0]
        self.radius = float(radius)
        if not 0.0 < self.radius < 0.5:
            raise ValueError("radius must lie in (0, 0.5) so the support embeds")
        self.amplitude = float(amplitude)
        v = np.atleast_1d(np.asarray(direction, dtype=float))
        nv = np.linalg.norm(v)
        if nv == 0:
            raise ValueError("direction must be nonzero")
        self.direction = v / nv
        self._check_c1()

    def _check_c1(self):
        # sample sup|phi| and sup|grad phi| over the support
        ts = np.linspace(-self.radius, self.radius, 41)
        if self.dim == 2:
            gx, gy = np.meshgrid(ts, ts)
            pts = wrap(np.column_stack([gx.ravel(), gy.ravel()]) + self.center)
        else:
            pts = wrap(ts[:, None] + self.center)
        sup_val = float(np.max(np.abs(self.value_batch(pts))))
        sup_grad = float(np.max(np.linalg.norm(self.grad_batch(pts), axis=1)))
        self.lipschitz = sup_grad
        scale = abs(self.amplitude)
        if scale > 0 and max(sup_val, sup_grad) > C1_MULTIPLE * scale:
            raise ValueError(
                f"C1 norm {max(sup_val, sup_grad):.3e} exceeds "
                f"{C1_MULTIPLE} * amplitude"
            )

    def value(self, q):
        return float(self.value_batch(np.asarray(q, dtype=float)[None, :])[0])

    def value_batch(self, pts):
        pts = np.asarray(pts, dtype=float)
        d = (pts - self.center + 0.5) % 1.0 - 0.5
        t = np.sum(d * d, axis=1) / self.radius ** 2
        return self.amplitude * _beta(t) * (d @ self.direction)

    def grad(self, q):
        return self.grad_batch(np.asarray(q, dtype=float)[None, :])[0]

    def grad_batch(self, pts):
        pts = np.asarray(pts, dtype=float)
        d = (pts - self.center + 0.5) % 1.0 - 0.5
        t = np.sum(d * d, axis=1) / self.radius ** 2
        b = _beta(t)
        bp = _beta_prime(t)
        along = d @ self.direction
        return self.amplitude * (
            b[:, None] * self.direction[None, :]
            + (bp * along * 2.0 / self.radius ** 2)[:, None] * d
        )

    def in_support(self, q):
        d = wrapped_delta(q, self.center)
        return float(np.dot(d, d)) < self.radius ** 2

    @classmethod
    def default_for(cls, base_map, amplitude=0.05, radius=0.15):
        """Bump at the origin pushed along the unstable eigendirection."""
        center = np.zeros(base_map.dim)
        return cls(center, radius, amplitude, base_map.eigen.v_u)

    def __repr__(self):
        return (
            f"BumpFunction(center={self.center.tolist()}, radius={self.radius}, "
            f"amplitude={self.amplitude})"
        )
