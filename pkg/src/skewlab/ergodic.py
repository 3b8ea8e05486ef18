"""Statistical diagnostics: Birkhoff averages, box transitivity, leafwise
densities, and volume preservation certificates.

Everything here is Monte Carlo over seeded ensembles.  Results are
deterministic for a fixed seed: starts are drawn in one fixed-layout
call, reductions run in index order, and growing an ensemble keeps the
existing members' draws.
"""

import numpy as np

from .skew_product import FiberedPoint, jacobian_sum_check
from .errors import ValidationError

_trapz = getattr(np, "trapezoid", None) or getattr(np, "trapz")


class Observable:
    """Named closed-form function on phase-space states.

    States are arrays (n, base_dim + 1) with the fiber angle last.  The
    catalog functions all have zero space average under volume and take
    values in [-1, 1].
    """

    def __init__(self, name, fn, space_average=0.0):
        self.name = name
        self.fn = fn
        self.space_average = space_average

    def value_batch(self, states):
        return self.fn(np.asarray(states, dtype=float))

    def value(self, p):
        return float(self.value_batch(np.asarray(p.as_state())[None, :])[0])

    def __repr__(self):
        return f"Observable({self.name})"


OBSERVABLES = {
    "cos_theta": Observable("cos_theta", lambda s: np.cos(2 * np.pi * s[:, -1])),
    "sin_theta": Observable("sin_theta", lambda s: np.sin(2 * np.pi * s[:, -1])),
    "cos_x": Observable("cos_x", lambda s: np.cos(2 * np.pi * s[:, 0])),
    "cos_x_plus_theta": Observable(
        "cos_x_plus_theta", lambda s: np.cos(2 * np.pi * (s[:, 0] + s[:, -1]))
    ),
}


def get_observable(name):
    try:
        return OBSERVABLES[name]
    except KeyError:
        raise ValidationError(
            "unknown observable %r, have %s" % (name, sorted(OBSERVABLES))
        ) from None


def _batch_time_averages(F, observable, states, N):
    """Per-row time averages of the observable over N steps, j = 0 to
    N-1, advancing the whole ensemble in lock step."""
    states = np.array(states, dtype=float)
    acc = np.zeros(len(states))
    for _ in range(N):
        acc += observable.value_batch(states)
        states = F.step_batch(states)
    return acc / N


def birkhoff_average(F, observable, start, N):
    if N < 1:
        raise ValidationError("N must be at least 1")
    state = np.asarray(start.as_state(), dtype=float)[None, :]
    return float(_batch_time_averages(F, observable, state, N)[0])


class BirkhoffReport:
    def __init__(self, starts, averages, N, seed, observable):
        self.starts = starts
        self.averages = averages
        self.N = N
        self.seed = seed
        self.observable = observable
        self.mean = float(np.mean(averages))
        self.dispersion = float(np.std(averages))

    def __repr__(self):
        return (
            f"BirkhoffReport(n_starts={len(self.averages)}, N={self.N}, "
            f"mean={self.mean:.4e}, dispersion={self.dispersion:.4e})"
        )


def birkhoff_dispersion(F, observable, starts, N, seed=0):
    """Ensemble of time averages from uniformly sampled starts; the
    dispersion (ensemble standard deviation) is the ergodicity
    diagnostic: near zero when time averages are a.e. constant."""
    if starts < 2:
        raise ValidationError("need at least 2 starts")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(starts, F.base_map.dim + 1))
    averages = _batch_time_averages(F, observable, pts, N)
    return BirkhoffReport(pts, averages, N, seed, observable.name)


class TransitivityReport:
    def __init__(self, grid, N, fraction, epsilon, cloud_size, seed, history):
        self.grid = grid
        self.N = N
        self.fraction = fraction
        self.epsilon = epsilon
        self.cloud_size = cloud_size
        self.seed = seed
        self.history = history

    def __repr__(self):
        return (
            f"TransitivityReport(G={self.grid}, N={self.N}, "
            f"fraction={self.fraction:.4f})"
        )


def _default_checkpoints(N):
    if N <= 0:
        return [0]
    ks = np.unique(np.round(np.geomspace(1, N, 20)).astype(int))
    return [0] + [int(k) for k in ks]


def box_transitivity(F, center, epsilon, grid, N, cloud_size, seed=0, checkpoints=None):
    """Iterate a uniform cloud from the sup-ball around center and count
    visited boxes of the grid^(dim+1) partition of phase space.

    The cloud is drawn in one fixed-layout call, so enlarging
    cloud_size keeps the original particles and the visited fraction is
    monotone in both N and cloud_size.
    """
    if grid < 2:
        raise ValidationError("grid must be at least 2")
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    dim = F.base_map.dim + 1
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=(cloud_size, dim))
    c = np.asarray(center.as_state(), dtype=float)
    states = (c[None, :] + epsilon * u) % 1.0
    visited = np.zeros((grid,) * dim, dtype=bool)
    if checkpoints is None:
        checkpoints = _default_checkpoints(N)
    marks = set(int(k) for k in checkpoints)

    def mark(s):
        idx = np.floor(s * grid).astype(int) % grid
        visited[tuple(idx.T)] = True

    history = []
    mark(states)
    if 0 in marks:
        history.append((0, visited.sum() / visited.size))
    for n in range(1, N + 1):
        states = F.step_batch(states)
        mark(states)
        if n in marks:
            history.append((n, visited.sum() / visited.size))
    fraction = visited.sum() / visited.size
    return TransitivityReport(grid, N, float(fraction), epsilon, cloud_size, seed, history)


def slab_box_bound(epsilon, grid):
    """Number of fiber levels a product-map cloud of half-height epsilon
    can ever visit, as a fraction of all boxes.  The fiber coordinate is
    frozen, so visited boxes live in at most ceil(2*eps*G) + 1 layers."""
    layers = min(grid, int(np.ceil(2 * epsilon * grid)) + 1)
    return layers / grid


def _ju_sweep_batch(F, bases_old_to_new):
    """Unstable Jacobian norms along parallel preorbits.

    bases_old_to_new is (m, Q, d) ordered from the deepest point
    forward; returns (m, Q) with J[j, q] = |dF e_u| at bases[j, q].  A
    pushed seed frame self-corrects toward e_u at rate a_s/a_u, so the
    late entries (small k) are the accurate ones.
    """
    m, Q, d = bases_old_to_new.shape
    e = np.zeros((Q, d + 1))
    e[:, :d] = F.base_map.eigen.v_u
    js = np.empty((m, Q))
    for j in range(m):
        M = F.derivative_batch(bases_old_to_new[j])
        e = np.einsum("qij,qj->qi", M, e)
        n = np.linalg.norm(e, axis=1)
        js[j] = n
        e /= n[:, None]
    return js


def _ju_sweep(F, bases_old_to_new):
    # single-preorbit case, same code path so that identical inputs give
    # bit-identical Jacobians
    return _ju_sweep_batch(F, np.asarray(bases_old_to_new)[:, None, :])[:, 0]


def srb_delta_u(F, pre_x, pre_y, K):
    """Truncated unstable Jacobian ratio product between two preorbits
    on one unstable leaf,

        Delta = prod_{k=1}^{K} J^u(x_{-k}) / J^u(y_{-k}).

    Returns (delta, tail_bound) with |full/truncated - 1| <= tail_bound,
    assembled from the computed terms beyond K plus a geometric
    extrapolation past the preorbit depth.
    """
    depth = min(pre_x.depth, pre_y.depth)
    if not (1 <= K <= depth):
        raise ValidationError("K must lie in [1, depth]")
    bx = pre_x.bases()[1 : depth + 1][::-1]
    by = pre_y.bases()[1 : depth + 1][::-1]
    jx = _ju_sweep(F, bx)
    jy = _ju_sweep(F, by)
    # jx[j] is J at x_{-(depth-j)}; ratio index k runs 1..depth
    log_r = np.log(jx) - np.log(jy)
    log_r_by_k = log_r[::-1]
    delta = float(np.exp(np.sum(log_r_by_k[:K])))
    rest = np.abs(log_r_by_k[K:])
    a_u = F.base_map.eigen.a_u
    log_tail = float(np.sum(rest))
    if depth > K:
        log_tail += float(rest[-1]) / (a_u - 1.0)
    return delta, float(np.expm1(log_tail))


class SrbLeafDensity:
    """Leafwise density sample: parameters, ratio products, and the
    normalized density along one unstable segment."""

    def __init__(self, ts, delta, rho, L, K, tail_bound):
        self.ts = ts
        self.delta = delta
        self.rho = rho
        self.L = L
        self.K = K
        self.tail_bound = tail_bound

    def mass(self):
        return float(_trapz(self.rho, self.ts))


def srb_density(F, anchor_pre, half_length, quad_points, K=None):
    """Density of the leafwise measure along the unstable segment
    [-half_length, half_length] through the anchor, from truncated
    Jacobian ratio products against the anchor preorbit, trapezoid
    normalized."""
    if not (0 < half_length < 0.5):
        raise ValidationError("half_length must lie in (0, 0.5)")
    depth = anchor_pre.depth
    if K is None:
        K = max(1, depth - 20)
    if K > depth:
        raise ValidationError("K must not exceed the preorbit depth")
    eig = F.base_map.eigen
    d = F.base_map.dim
    ts = np.linspace(-half_length, half_length, quad_points)
    bx = anchor_pre.bases()[1 : depth + 1][::-1]
    jx = _ju_sweep(F, bx)
    # shadow preorbits in closed form: y_{-k} = x_{-k} + t a_u^{-k} v_u
    scales = eig.a_u ** -np.arange(depth, 0, -1)
    by = bx[:, None, :] + (scales[:, None] * ts[None, :])[:, :, None] * eig.v_u
    by = by % 1.0
    jy = _ju_sweep_batch(F, by)
    log_r = np.log(jx)[:, None] - np.log(jy)
    log_r_by_k = log_r[::-1]
    delta = np.exp(np.sum(log_r_by_k[:K], axis=0))
    rest = np.abs(log_r_by_k[K:])
    log_tail = rest.sum(axis=0)
    if depth > K:
        log_tail += rest[-1] / (eig.a_u - 1.0)
    L = float(_trapz(delta, ts))
    rho = delta / L
    return SrbLeafDensity(ts, delta, rho, L, K, float(np.expm1(log_tail.max())))


class VolumeCertificate:
    def __init__(self, passed, max_deviation, samples, seed):
        self.passed = passed
        self.max_deviation = max_deviation
        self.samples = samples
        self.seed = seed

    def __bool__(self):
        return self.passed

    def __repr__(self):
        tag = "pass" if self.passed else "FAIL"
        return f"VolumeCertificate({tag}, max_deviation={self.max_deviation:.3e})"


def volume_preservation_certificate(F, samples=100, seed=0, tol=1e-9):
    """Max deviation of the preimage Jacobian sum from 1 over random
    points; certifies the change-of-variables identity behind volume
    preservation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        p = FiberedPoint(rng.uniform(size=F.base_map.dim), float(rng.uniform()))
        worst = max(worst, abs(jacobian_sum_check(F, p) - 1.0))
    return VolumeCertificate(bool(worst < tol), float(worst), samples, seed)
