"""Invariant bundle estimates and Lyapunov exponents.

The stable direction is recovered by power iteration of the inverse
derivative cocycle along the forward orbit (it depends on the point alone);
the unstable direction by pushing a seed forward along a preorbit (it
depends on the branch history); the center direction as the intersection of
the estimated center-stable and center-unstable planes.  Exponents come from
a QR cocycle with the exact fiber vector as the leading frame column, which
pins the center exponent to zero instead of leaving it to roundoff.
Directions are projective: a result and its negative are the same answer.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateSeed, ValidationError
from .skew_product import FiberedPoint, iterate_base, jacobian_sum_check

# fixed generic seeds for power iterations, reseeding order on degeneracy
_SEEDS = (
    np.array([0.66436384, 0.54917712, 0.50692831]),
    np.array([-0.28916624, 0.84060235, 0.45818741]),
    np.array([0.51742516, -0.18936261, -0.83444149]),
)


def proj_angle(u, v):
    """Angle between lines spanned by u and v, in [0, pi/2].

    Uses the orthogonal rejection, so angles near zero keep full precision.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    c = float(u @ v)
    if c < 0:
        v = -v
        c = -c
    w = v - c * u
    return float(np.arctan2(np.linalg.norm(w), c))


def _fiber_vector(dim):
    e = np.zeros(dim)
    e[-1] = 1.0
    return e


def _seed(dim, attempt):
    return _SEEDS[attempt][:dim] / np.linalg.norm(_SEEDS[attempt][:dim])


def _pullback(F, bases, w):
    """Apply inverse derivatives at bases[-1], ..., bases[0] to w, normalized."""
    for k in range(bases.shape[0] - 1, -1, -1):
        w = F.derivative_inverse(bases[k]) @ w
        nw = np.linalg.norm(w)
        if nw < 1e-300:
            raise DegenerateSeed("inverse cocycle annihilated the seed")
        w = w / nw
    return w


def _pushforward(F, bases, w):
    """Apply derivatives at bases[0], ..., bases[-1] to w, normalized."""
    for k in range(bases.shape[0]):
        w = F.derivative(bases[k]) @ w
        nw = np.linalg.norm(w)
        if nw < 1e-300:
            raise DegenerateSeed("cocycle annihilated the seed")
        w = w / nw
    return w


def estimate_stable_direction(F, x, n):
    """Stable direction at x from n forward steps; returns (direction, residual).

    The residual is the angle between the estimates using n and n//2 steps.
    Only defined over hyperbolic torus bases.
    """
    if F.base_map.dim < 2:
        raise ValidationError("an expanding base has no stable direction")
    if n < 1:
        raise ValueError("n must be at least 1")
    orbit = iterate_base(F.base_map, x.base, n)
    m = max(1, n // 2)
    for attempt in range(3):
        w = _pullback(F, orbit[:n], _seed(F.dim, attempt))
        w_half = _pullback(F, orbit[:m], _seed(F.dim, attempt))
        residual = proj_angle(w, w_half)
        if n < 16 or residual < 1e-3:
            return w, residual
    raise DegenerateSeed("stable direction estimates failed to settle")


def estimate_unstable_direction(F, pre, n=None):
    """Unstable direction at the preorbit anchor; returns (direction, residual).

    Pushes a seed from x_{-n} forward through the derivative cocycle; the
    result depends on the branch itinerary, not only on the anchor.
    """
    if n is None:
        n = pre.depth
    if not 1 <= n <= pre.depth:
        raise ValueError("n must lie in 1..pre.depth")
    bases = np.array([pre.base_at(k) for k in range(n, 0, -1)])
    m = max(1, n // 2)
    for attempt in range(3):
        w = _pushforward(F, bases, _seed(F.dim, attempt))
        w_half = _pushforward(F, bases[-m:], _seed(F.dim, attempt))
        residual = proj_angle(w, w_half)
        if n < 16 or residual < 1e-3:
            return w, residual
    raise DegenerateSeed("unstable direction estimates failed to settle")


def _plane_normal(F, frames):
    q1, q2 = frames[:, 0], frames[:, 1]
    nrm = np.cross(q1, q2)
    return nrm / np.linalg.norm(nrm)


def estimate_center_direction(F, x, pre, n):
    """Center direction at x as the intersection of the center-stable plane
    (inverse cocycle along the forward orbit) and the center-unstable plane
    (forward cocycle along the preorbit); returns (direction, residual).

    The residual is the angle between dF applied to the estimate and the
    estimate itself; the fiber field of a rotation extension is parallel, so
    this vanishes at the true center.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    dim = F.dim
    e_fib = _fiber_vector(dim)
    if F.base_map.dim == 1:
        orbit = iterate_base(F.base_map, x.base, n)
        w = _pullback(F, orbit[:n], _seed(dim, 0))
        residual = proj_angle(F.derivative(x.base) @ w, w)
        return w, residual
    orbit = iterate_base(F.base_map, x.base, n)
    pre_bases = np.array([pre.base_at(k) for k in range(min(n, pre.depth), 0, -1)])
    for attempt in range(3):
        frame = np.column_stack([e_fib, _seed(dim, attempt)])
        Fr = frame.copy()
        for k in range(n - 1, -1, -1):
            Fr, _ = np.linalg.qr(F.derivative_inverse(orbit[k]) @ Fr)
        n_cs = _plane_normal(F, Fr)
        Fr = frame.copy()
        for k in range(pre_bases.shape[0]):
            Fr, _ = np.linalg.qr(F.derivative(pre_bases[k]) @ Fr)
        n_cu = _plane_normal(F, Fr)
        w = np.cross(n_cs, n_cu)
        nw = np.linalg.norm(w)
        if nw > 1e-12:
            w = w / nw
            residual = proj_angle(F.derivative(x.base) @ w, w)
            return w, residual
    raise DegenerateSeed("center-stable and center-unstable planes collapsed")


class SplittingEstimate:
    """Estimated splitting at a point with invariance defects.

    residuals maps 's'/'c'/'u' to the angle between dF(at)·e_sigma and the
    recomputed direction at F(at).
    """

    def __init__(self, at, e_s, e_c, e_u, residuals):
        self.at = at
        self.e_s = e_s
        self.e_c = e_c
        self.e_u = e_u
        self.residuals = residuals

    def __repr__(self):
        worst = max(self.residuals.values())
        return f"SplittingEstimate(worst_residual={worst:.3e})"


def estimate_splitting(F, x, pre, n=60):
    """Full splitting at x with invariance defects against the image point."""
    e_s, _ = estimate_stable_direction(F, x, n)
    e_u, _ = estimate_unstable_direction(F, pre, min(n, pre.depth))
    e_c, _ = estimate_center_direction(F, x, pre, n)
    fx = F.apply(x)
    pre_fx = pre.extended_by_image()
    J = F.derivative(x.base)
    e_s_im, _ = estimate_stable_direction(F, fx, n)
    e_u_im, _ = estimate_unstable_direction(F, pre_fx, min(n, pre_fx.depth))
    e_c_im, _ = estimate_center_direction(F, fx, pre_fx, n)
    residuals = {
        "s": proj_angle(J @ e_s, e_s_im),
        "c": proj_angle(J @ e_c, e_c_im),
        "u": proj_angle(J @ e_u, e_u_im),
    }
    return SplittingEstimate(x, e_s, e_c, e_u, residuals)


def unstable_direction_spread(F, preorbits, n=None):
    """Max pairwise angle between unstable directions over the preorbit set."""
    preorbits = list(preorbits)
    if len(preorbits) < 2:
        raise ValueError("need at least two preorbits")
    anchor = preorbits[0].anchor
    for p in preorbits[1:]:
        if np.max(np.abs(p.anchor.base - anchor.base)) > 1e-9:
            raise ValueError("preorbits must share their anchor")
    dirs = [estimate_unstable_direction(F, p, n)[0] for p in preorbits]
    spread = 0.0
    for i in range(len(dirs)):
        for j in range(i + 1, len(dirs)):
            spread = max(spread, proj_angle(dirs[i], dirs[j]))
    return spread


class LyapunovTriple:
    """Exponents in nats per step, ordered lam_s <= lam_c <= lam_u.

    lam_s is None over an expanding base (no contracting direction).  se
    holds batch-means standard errors in the same (s, c, u) order.
    """

    def __init__(self, lam_s, lam_c, lam_u, n, se):
        self.lam_s = lam_s
        self.lam_c = lam_c
        self.lam_u = lam_u
        self.n = n
        self.se = se

    def total(self):
        s = 0.0 if self.lam_s is None else self.lam_s
        return s + self.lam_c + self.lam_u

    def __repr__(self):
        return (
            f"LyapunovTriple(lam_s={self.lam_s}, lam_c={self.lam_c}, "
            f"lam_u={self.lam_u}, n={self.n})"
        )


def lyapunov_exponents(F, x, n, seed=0, block=8, batches=10):
    """QR-cocycle exponents along the orbit of x.

    The initial frame leads with the exact fiber vector, which the
    derivative fixes, so the center diagonal entry is exactly 1 every step.
    Derivatives are pre-multiplied in blocks (default 8, well inside the
    conditioning budget (a_u/a_s)^block << 1/eps) and the running frame is
    re-orthogonalized per block.
    """
    if n < block:
        raise ValueError("n must be at least the block size")
    d = F.base_map.dim
    dim = d + 1
    rng = np.random.default_rng(seed)
    Q = np.zeros((dim, dim))
    Q[-1, 0] = 1.0
    if d == 1:
        Q[0, 1] = 1.0
    else:
        a = rng.uniform(0.0, 2.0 * np.pi)
        Q[:2, 1] = (np.cos(a), np.sin(a))
        Q[:2, 2] = (-np.sin(a), np.cos(a))
    nblocks = n // block
    steps = nblocks * block
    logs = np.empty((nblocks, dim))
    chunk_blocks = 8192
    base = x.base
    for b0 in range(0, nblocks, chunk_blocks):
        nb = min(chunk_blocks, nblocks - b0)
        orbit = iterate_base(F.base_map, base, nb * block)
        base = orbit[-1]
        P = F.derivative_batch(orbit[:-1]).reshape(nb, block, dim, dim)
        m = block
        while m > 1:
            P = np.matmul(P[:, 1::2], P[:, 0::2])
            m //= 2
        P = P[:, 0]
        for i in range(nb):
            Z = P[i] @ Q
            Q, R = np.linalg.qr(Z)
            logs[b0 + i] = np.log(np.abs(np.diag(R)))
    lam_vec = logs.sum(axis=0) / steps
    bm = logs[: (nblocks // batches) * batches]
    bm = bm.reshape(batches, -1, dim).mean(axis=1) / block
    se_vec = bm.std(axis=0, ddof=1) / np.sqrt(batches)
    lam_c = float(lam_vec[0])
    se_c = float(se_vec[0])
    rest = lam_vec[1:]
    if d == 1:
        return LyapunovTriple(None, lam_c, float(rest[0]), steps, (None, se_c, float(se_vec[1])))
    i_u = int(np.argmax(rest))
    i_s = 1 - i_u
    return LyapunovTriple(
        float(rest[i_s]),
        lam_c,
        float(rest[i_u]),
        steps,
        (float(se_vec[1 + i_s]), se_c, float(se_vec[1 + i_u])),
    )


def _stable_field_sweep(F, orbit_bases, settle=60):
    """Backward sweep of the inverse cocycle over a batched orbit.

    orbit_bases has shape (T+1, S, d); returns unit fields (T_use, S, dim)
    valid at indices 0..T-settle-1, where the sweep has converged.
    """
    T = orbit_bases.shape[0] - 1
    S = orbit_bases.shape[1]
    dim = F.base_map.dim + 1
    if T <= settle:
        raise ValueError("orbit too short for the sweep to settle")
    w = np.tile(_seed(dim, 0), (S, 1))
    out = np.empty((T - settle, S, dim))
    for j in range(T - 1, -1, -1):
        Jinv = F.derivative_inverse_batch(orbit_bases[j])
        w = np.einsum("sij,sj->si", Jinv, w)
        w = w / np.linalg.norm(w, axis=1, keepdims=True)
        if j < T - settle:
            out[j] = w
    return out


def _batched_orbit(F, starts, T):
    """(T+1, S, d) base orbit array over an ensemble of start bases."""
    S, d = starts.shape
    out = np.empty((T + 1, S, d))
    out[0] = starts % 1.0
    M = F.base_map.matrix
    cur = out[0]
    for j in range(1, T + 1):
        cur = (cur @ M.T) % 1.0
        out[j] = cur
    return out


def mean_center_exponent(F, sample_size, orbit_length, seed=0, batches=10):
    """Monte-Carlo estimate of the mean center exponent; returns (value, se).

    Per start: time average of log|det dF restricted to the estimated
    center-stable plane| minus time average of log norm of dF restricted to
    the estimated stable direction.  Zero for isometric fiber rotations.
    """
    rng = np.random.default_rng(seed)
    d = F.base_map.dim
    S, T = sample_size, orbit_length
    starts = rng.random((S, d))
    orbit = _batched_orbit(F, starts, T)
    settle = 60
    # over an expanding base the backward sweep converges to the center
    # direction (nothing contracts); over a torus base, to the stable one
    field = _stable_field_sweep(F, orbit, settle=settle)
    Tu = field.shape[0]
    vals = np.zeros(S)
    for j in range(Tu):
        Jb = F.derivative_batch(orbit[j])
        img = np.einsum("sij,sj->si", Jb, field[j])
        if d == 1:
            vals += np.log(np.linalg.norm(img, axis=1))
        else:
            log_js = np.log(np.linalg.norm(img, axis=1))
            num = np.linalg.norm(img[:, :d], axis=1)
            den = np.linalg.norm(field[j][:, :d], axis=1)
            vals += np.log(num / den) - log_js
    vals /= Tu
    bm = vals[: (S // batches) * batches].reshape(batches, -1).mean(axis=1)
    se = float(bm.std(ddof=1) / np.sqrt(batches))
    return float(vals.mean()), se


def pesin_entropy_estimate(F, sample_size, orbit_length, seed=0, burn=100, batches=10):
    """Monte-Carlo average of the positive Lyapunov exponents; returns (value, se).

    Checks volume preservation first (the entropy formula assumes it).
    """
    rng = np.random.default_rng(seed)
    d = F.base_map.dim
    for _ in range(5):
        p = FiberedPoint(rng.random(d), rng.random())
        if abs(jacobian_sum_check(F, p) - 1.0) > 1e-9:
            raise ValidationError("map does not preserve volume")
    S, T = sample_size, orbit_length
    starts = rng.random((S, d))
    orbit = _batched_orbit(F, starts, burn + T)
    w = np.tile(_seed(d + 1, 0), (S, 1))
    logs = np.zeros(S)
    for j in range(burn + T):
        Jb = F.derivative_batch(orbit[j])
        w = np.einsum("sij,sj->si", Jb, w)
        nrm = np.linalg.norm(w, axis=1)
        if j >= burn:
            logs += np.log(nrm)
        w = w / nrm[:, None]
    vals = logs / T
    bm = vals[: (S // batches) * batches].reshape(batches, -1).mean(axis=1)
    se = float(bm.std(ddof=1) / np.sqrt(batches))
    return float(vals.mean()), se


class RateEstimates:
    """Empirical partial-hyperbolicity constants fitted from one orbit.

    nu/mu are the asymptotic stable/unstable rates, gamma1/gamma2 bound the
    center rate, and C absorbs finite-window fluctuation around the fits.
    """

    def __init__(self, nu, gamma1, gamma2, mu, C):
        self.nu = nu
        self.gamma1 = gamma1
        self.gamma2 = gamma2
        self.mu = mu
        self.C = C

    def certifies_partial_hyperbolicity(self):
        return (
            0.0 < self.nu < self.gamma1 <= self.gamma2 < self.mu
            and self.nu < 1.0 < self.mu
            and self.C >= 1.0
        )

    def __repr__(self):
        return (
            f"RateEstimates(nu={self.nu:.4f}, gamma1={self.gamma1:.4f}, "
            f"gamma2={self.gamma2:.4f}, mu={self.mu:.4f}, C={self.C:.4f})"
        )


def estimate_rates(F, x, n=400, window=24):
    """Fit empirical cocycle rates along the orbit of x (torus bases only)."""
    if F.base_map.dim < 2:
        raise ValidationError("rate fits need a contracting direction")
    settle = 60
    orbit = _batched_orbit(F, x.base[None, :], n + settle)
    es = _stable_field_sweep(F, orbit, settle=settle)[:, 0, :]
    T = es.shape[0]
    eu = _seed(F.dim, 0)
    log_ju = np.empty(T)
    log_js = np.empty(T)
    for j in range(T):
        J = F.derivative(orbit[j, 0])
        gu = J @ eu
        log_ju[j] = np.log(np.linalg.norm(gu))
        eu = gu / np.linalg.norm(gu)
        log_js[j] = np.log(np.linalg.norm(J @ es[j]))
    burn = 60
    log_ju = log_ju[burn:]
    log_js = log_js[burn:]
    nu = float(np.exp(log_js.mean()))
    mu = float(np.exp(log_ju.mean()))
    gamma1 = gamma2 = 1.0  # the fiber row of dF ends in exactly 1
    C = 1.0
    for w in range(1, window + 1):
        ks = np.arange(log_js.shape[0] - w)
        sums_s = np.array([log_js[k : k + w].sum() for k in ks])
        sums_u = np.array([log_ju[k : k + w].sum() for k in ks])
        C = max(C, float(np.exp(sums_s.max() - w * np.log(nu))))
        C = max(C, float(np.exp(w * np.log(mu) - sums_u.min())))
    return RateEstimates(nu, gamma1, gamma2, mu, C)
