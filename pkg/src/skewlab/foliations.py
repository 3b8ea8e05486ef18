"""Invariant leaf charts, fiber holonomy, and su-path construction.

A point of the skew product sits on a stable and an unstable leaf whose
base shadows are straight eigenlines of the base map.  The fiber
coordinate along a leaf is the anchor angle plus a convergent series of
bump differences over the forward orbit (stable side) or a chosen
preorbit (unstable side).  Everything downstream, holonomy of
quadrilaterals, accessibility paths, leaf sampling, is built from the
two chart classes below.
"""

import numpy as np

from .base_dynamics import wrap, wrapped_delta, torus_dist, circle_dist
from .skew_product import FiberedPoint, fibered_dist
from .orbit_space import sample_preorbit, StayOutside, FixedItinerary
from .errors import LegTooLong, ValidationError, NotAccessibleNumerically

MAX_U_LEG = 0.35
MAX_S_LEG = 0.45
LOOP_CAP = 100000


class StableLeafChart:
    """Arc of the stable leaf through ``anchor``, parameterized by signed
    base displacement t along the contracting eigendirection.

    The fiber offset at parameter t is

        sum_{n>=0} phi(f^n x) - phi(f^n x + t a_s^n v_s)

    truncated at ``depth`` terms; ``tail_bound`` controls the rest.
    """

    def __init__(self, F, anchor, depth=40):
        if F.base_map.dim != 2:
            raise ValidationError("stable leaf charts need a two dimensional base")
        self.F = F
        self.anchor = anchor
        self.depth = depth
        eig = F.base_map.eigen
        self.v = eig.v_s
        self.rate = eig.a_s
        x = np.asarray(anchor.base, dtype=float)
        orbit = np.empty((depth, 2))
        orbit[0] = x
        for n in range(1, depth):
            orbit[n] = F.base_map.apply(orbit[n - 1])
        self._orbit = orbit
        self._scales = self.rate ** np.arange(depth)
        lip = F.bump.lipschitz if F.bump is not None else 0.0
        self._tail_coef = lip * self.rate ** depth / (1.0 - self.rate)

    def offsets(self, ts):
        """Fiber offsets and truncation tail bounds for an array of
        parameters.  Offsets are exact sums of the truncated series, so
        evaluating on [a,c] equals the sum over [a,b] and [b,c] to the
        last bit."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if np.any(np.abs(ts) >= 0.5):
            raise LegTooLong("stable leg parameter must stay below half a period")
        if self.F.bump is None:
            return np.zeros(len(ts)), np.zeros(len(ts))
        # displaced[n, i] = f^n(x) + t_i a_s^n v_s; value_batch wraps internally
        disp = self._orbit[:, None, :] + (ts[None, :] * self._scales[:, None])[:, :, None] * self.v
        flat = disp.reshape(-1, 2)
        vals_ref = self.F.bump.value_batch(self._orbit)
        vals_disp = self.F.bump.value_batch(flat).reshape(self.depth, len(ts))
        off = (vals_ref[:, None] - vals_disp).sum(axis=0)
        tails = self._tail_coef * np.abs(ts)
        return off, tails

    def offset(self, t):
        off, tails = self.offsets([t])
        return float(off[0]), float(tails[0])

    def point(self, t):
        off, _ = self.offset(t)
        base = wrap(self.anchor.base + t * self.v)
        return FiberedPoint(base, (self.anchor.theta + off) % 1.0)


class UnstableLeafChart:
    """Arc of the unstable leaf selected by a preorbit of the anchor.

    Parameter t is the signed base displacement along the expanding
    eigendirection; displaced preimages are the closed form shadow
    x_{-n} + t a_u^{-n} v_u, and the fiber offset is

        sum_{n>=1} phi(x'_{-n}) - phi(x_{-n}).
    """

    def __init__(self, F, preorbit, depth=None):
        self.F = F
        self.preorbit = preorbit
        if depth is None:
            depth = min(preorbit.depth, 40)
        if depth > preorbit.depth:
            raise ValidationError("chart depth exceeds preorbit depth")
        self.depth = depth
        self.anchor = preorbit.anchor
        eig = F.base_map.eigen
        self.v = eig.v_u
        self.rate = eig.a_u
        bases = preorbit.bases()
        self._past = bases[1 : depth + 1]
        self._scales = self.rate ** -np.arange(1, depth + 1)
        lip = F.bump.lipschitz if F.bump is not None else 0.0
        self._tail_coef = lip * self.rate ** -depth / (self.rate - 1.0)

    def offsets(self, ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if np.any(np.abs(ts) >= 0.5):
            raise LegTooLong("unstable leg parameter must stay below half a period")
        if self.F.bump is None:
            return np.zeros(len(ts)), np.zeros(len(ts))
        d = self._past.shape[1]
        disp = self._past[:, None, :] + (ts[None, :] * self._scales[:, None])[:, :, None] * self.v
        flat = disp.reshape(-1, d)
        vals_ref = self.F.bump.value_batch(self._past)
        vals_disp = self.F.bump.value_batch(flat).reshape(self.depth, len(ts))
        off = (vals_disp - vals_ref[:, None]).sum(axis=0)
        tails = self._tail_coef * np.abs(ts)
        return off, tails

    def offset(self, t):
        off, tails = self.offsets([t])
        return float(off[0]), float(tails[0])

    def point(self, t):
        off, _ = self.offset(t)
        base = wrap(self.anchor.base + t * self.v)
        return FiberedPoint(base, (self.anchor.theta + off) % 1.0)


def stable_fiber_offset(F, x, other_base, depth=40):
    """Fiber offset between x and the point of its stable leaf over
    ``other_base``.  Returns (offset, tail_bound).  The target base must
    lie on the stable line through x."""
    chart = StableLeafChart(F, x, depth=depth)
    delta = wrapped_delta(np.asarray(other_base, dtype=float), np.asarray(x.base, dtype=float))
    t = float(delta @ chart.v)
    resid = np.linalg.norm(delta - t * chart.v)
    if resid > 1e-8:
        raise ValidationError("target base is off the stable line by %.3e" % resid)
    return chart.offset(t)


def unstable_fiber_offset(F, preorbit, other_base, depth=None):
    """Same as stable_fiber_offset along the unstable leaf selected by a
    preorbit of x."""
    chart = UnstableLeafChart(F, preorbit, depth=depth)
    delta = wrapped_delta(np.asarray(other_base, dtype=float), np.asarray(chart.anchor.base, dtype=float))
    t = float(delta @ chart.v)
    resid = np.linalg.norm(delta - t * chart.v)
    if resid > 1e-8:
        raise ValidationError("target base is off the unstable line by %.3e" % resid)
    return chart.offset(t)


def default_policy(F):
    if F.bump is not None:
        return StayOutside(F.bump)
    return FixedItinerary(0)


class QuadrilateralSpec:
    """Corner plus side lengths of an su-quadrilateral: out along the
    unstable leaf by t, up the stable leaf by s, back and down."""

    def __init__(self, corner, t, s, policy=None, series_depth=40, preorbit_depth=60):
        if not (0.0 < abs(t) < 0.5 and 0.0 < abs(s) < 0.5):
            raise ValidationError("side lengths must be nonzero and below half a period")
        self.corner = corner
        self.t = float(t)
        self.s = float(s)
        self.policy = policy
        self.series_depth = series_depth
        self.preorbit_depth = preorbit_depth


def _quad_charts(F, quad):
    policy = quad.policy if quad.policy is not None else default_policy(F)
    corner = quad.corner
    top_base = wrap(np.asarray(corner.base, dtype=float) + quad.s * F.base_map.eigen.v_s)
    pre0 = sample_preorbit(F, corner, quad.preorbit_depth, policy)
    pre3 = sample_preorbit(F, FiberedPoint(top_base, corner.theta), quad.preorbit_depth, policy)
    u0 = UnstableLeafChart(F, pre0, depth=min(quad.preorbit_depth, quad.series_depth))
    u3 = UnstableLeafChart(F, pre3, depth=min(quad.preorbit_depth, quad.series_depth))
    s0 = StableLeafChart(F, corner, depth=quad.series_depth)
    right_base = wrap(np.asarray(corner.base, dtype=float) + quad.t * F.base_map.eigen.v_u)
    s1 = StableLeafChart(F, FiberedPoint(right_base, corner.theta), depth=quad.series_depth)
    return u0, s1, u3, s0


def quad_holonomy_on_charts(u0, s1, u3, s0, t_iv, s_iv):
    """Holonomy of the sub-quadrilateral with unstable parameter range
    t_iv = (t_lo, t_hi) and stable range s_iv = (s_lo, s_hi), measured on
    fixed charts.  Interval evaluation makes refinement sums cancel
    exactly: the fiber increment of each leg is a difference of chart
    offsets at the interval ends."""
    t0, t1 = t_iv
    s0_, s1_ = s_iv
    du0, tu0 = u0.offsets([t0, t1])
    du3, tu3 = u3.offsets([t0, t1])
    # stable legs run between the same chart parameters on both sides
    ds1, ts1 = s1.offsets([s0_, s1_])
    ds0, ts0 = s0.offsets([s0_, s1_])
    hol = (du0[1] - du0[0]) + (ds1[1] - ds1[0]) - (du3[1] - du3[0]) - (ds0[1] - ds0[0])
    tail = tu0.max() + tu3.max() + ts1.max() + ts0.max()
    return float(hol), float(tail)


def quadrilateral_holonomy(F, quad, reverse=False, with_tail=False):
    """Net fiber rotation around an su-quadrilateral.

    The loop goes corner -> t along unstable -> s along stable ->
    -t along unstable -> -s along stable.  ``reverse`` traverses the
    same legs in the opposite order, which negates the result.
    """
    u0, s1, u3, s0 = _quad_charts(F, quad)
    hol, tail = quad_holonomy_on_charts(u0, s1, u3, s0, (0.0, quad.t), (0.0, quad.s))
    if reverse:
        hol = -hol
    if with_tail:
        return hol, tail
    return hol


def bisection_additivity_defect(F, quad):
    """Difference between a quadrilateral's holonomy and the sum over
    its four (t, s)-bisected sub-quadrilaterals.

    The nine shared charts (three unstable levels, three stable levels)
    are each built once; interval evaluation then cancels every interior
    contribution term by term, so the defect only measures floating
    point reassociation.
    """
    policy = quad.policy if quad.policy is not None else default_policy(F)
    eig = F.base_map.eigen
    base = np.asarray(quad.corner.base, dtype=float)
    t, s = quad.t, quad.s
    t_levels = [0.0, t / 2.0, t]
    s_levels = [0.0, s / 2.0, s]
    u_charts = []
    for lvl in s_levels:
        anchor = FiberedPoint(wrap(base + lvl * eig.v_s), quad.corner.theta)
        pre = sample_preorbit(F, anchor, quad.preorbit_depth, policy)
        u_charts.append(
            UnstableLeafChart(F, pre, depth=min(quad.preorbit_depth, quad.series_depth))
        )
    s_charts = []
    for lvl in t_levels:
        anchor = FiberedPoint(wrap(base + lvl * eig.v_u), quad.corner.theta)
        s_charts.append(StableLeafChart(F, anchor, depth=quad.series_depth))
    whole, _ = quad_holonomy_on_charts(
        u_charts[0], s_charts[2], u_charts[2], s_charts[0], (0.0, t), (0.0, s)
    )
    parts = 0.0
    for i in range(2):
        for j in range(2):
            h, _ = quad_holonomy_on_charts(
                u_charts[i],
                s_charts[j + 1],
                u_charts[i + 1],
                s_charts[j],
                (t_levels[j], t_levels[j + 1]),
                (s_levels[i], s_levels[i + 1]),
            )
            parts += h
    return abs(parts - whole)


def u_loop_holonomy(F, x, t, policy_out=None, policy_back=None):
    """Net fiber rotation of the out-and-back unstable loop at x over a
    circle base: out along the chart chosen by policy_out, back along
    the far endpoint's chart chosen by policy_back.  The two series
    disagree exactly when the unstable direction is preorbit-dependent.
    """
    if policy_out is None:
        policy_out = default_policy(F)
    if policy_back is None:
        policy_back = FixedItinerary(0)
    _, h = _u_only_proto(F, x, float(t), policy_out, policy_back)
    return h


def integrability_defect(F, x, scales, policy=None):
    """Largest absolute quadrilateral holonomy over square loops at x
    with the given side scales.  Zero for products, bounded away from
    zero when the fiber rotation couples to the base."""
    best = 0.0
    for sc in scales:
        quad = QuadrilateralSpec(x, sc, sc, policy=policy)
        best = max(best, abs(quadrilateral_holonomy(F, quad)))
    return best


class Leg:
    """One chart arc of an su-path: unstable or stable, traversed from
    parameter t0 to t1 on a fixed chart."""

    __slots__ = ("kind", "chart", "t0", "t1", "start", "end")

    def __init__(self, kind, chart, t0, t1, start, end):
        self.kind = kind
        self.chart = chart
        self.t0 = t0
        self.t1 = t1
        self.start = start
        self.end = end

    def residual(self):
        """Largest inconsistency between the recorded endpoints and the
        chart's own geometry."""
        off, _ = self.chart.offsets([self.t0, self.t1])
        dtheta = off[1] - off[0]
        anchor = np.asarray(self.chart.anchor.base, dtype=float)
        base0 = wrap(anchor + self.t0 * self.chart.v)
        base1 = wrap(anchor + self.t1 * self.chart.v)
        r = torus_dist(base0, np.asarray(self.start.base, dtype=float))
        r = max(r, torus_dist(base1, np.asarray(self.end.base, dtype=float)))
        want = (self.start.theta + dtheta) % 1.0
        r = max(r, circle_dist(want, self.end.theta))
        return r

    def describe(self):
        return {
            "kind": self.kind,
            "t0": self.t0,
            "t1": self.t1,
            "start": self.start,
            "end": self.end,
        }


class SuPath:
    """Concatenation of unstable and stable legs from start to target."""

    def __init__(self, legs, start, target):
        self.legs = legs
        self.start = start
        self.target = target
        end = legs[-1].end if legs else start
        self.base_error = torus_dist(
            np.asarray(end.base, dtype=float), np.asarray(target.base, dtype=float)
        )
        self.fiber_error = circle_dist(end.theta, target.theta)

    def endpoint(self):
        return self.legs[-1].end if self.legs else self.start

    def verify(self):
        """Max over legs of the chart residual, plus continuity gaps
        between consecutive legs."""
        worst = 0.0
        prev = self.start
        for leg in self.legs:
            worst = max(worst, leg.residual())
            worst = max(worst, fibered_dist(prev, leg.start))
            prev = leg.end
        return worst

    def leg_count(self):
        return len(self.legs)


def _split_leg(total, cap):
    """Signed increments of magnitude <= cap summing to total."""
    if total == 0.0:
        return []
    n = int(np.ceil(abs(total) / cap))
    return [total / n] * n


def _hop_u(F, cur, tau, policy, depth=60):
    pre = sample_preorbit(F, cur, depth, policy)
    chart = UnstableLeafChart(F, pre, depth=min(depth, 40))
    end = chart.point(tau)
    return Leg("u", chart, 0.0, tau, cur, end), end


def _hop_s(F, cur, tau, depth=40):
    chart = StableLeafChart(F, cur, depth=depth)
    end = chart.point(tau)
    return Leg("s", chart, 0.0, tau, cur, end), end


def _loop_proto(F, cur, t, s, policy):
    """Charts and per-leg fiber increments of the (t, s) quadrilateral
    at cur, computed once.  Loops can be replayed from any fiber angle
    because the increments only depend on the base."""
    quad = QuadrilateralSpec(cur, t, s, policy=policy)
    u0, s1c, u3, s0c = _quad_charts(F, quad)
    eig = F.base_map.eigen
    base = np.asarray(cur.base, dtype=float)
    b0 = base.copy()
    b1 = wrap(base + t * eig.v_u)
    b2 = wrap(base + t * eig.v_u + s * eig.v_s)
    b3 = wrap(base + s * eig.v_s)
    du0 = u0.offset(t)[0]
    ds1 = s1c.offset(s)[0]
    du3 = u3.offset(t)[0]
    ds0 = s0c.offset(s)[0]
    specs = [
        ("u", u0, 0.0, t, b0, b1, du0),
        ("s", s1c, 0.0, s, b1, b2, ds1),
        ("u", u3, t, 0.0, b2, b3, -du3),
        ("s", s0c, s, 0.0, b3, b0, -ds0),
    ]
    hol = du0 + ds1 - du3 - ds0
    return specs, hol


def _replay_loop(specs, cur, direction):
    """Legs of one loop traversal starting at cur.  direction -1 runs
    the recorded legs backwards, negating every fiber increment."""
    if direction > 0:
        seq = specs
    else:
        seq = [(k, c, t1, t0, e, b, -d) for (k, c, t0, t1, b, e, d) in reversed(specs)]
    legs = []
    pt = cur
    for kind, chart, t0, t1, _, b_end, dth in seq:
        end = FiberedPoint(b_end, (pt.theta + dth) % 1.0)
        legs.append(Leg(kind, chart, t0, t1, pt, end))
        pt = end
    return legs, pt


LOOP_SCALE_TOP = 0.4
LOOP_SCALE_RATIO = 0.65
LOOP_BUDGET = 1000


def _ladder_rungs(build, tol):
    """Replayable loops at geometrically descending scales, stopping
    once the holonomy magnitude stays well below tol.  A single tiny
    rung is not trusted as the bottom: the holonomy can cross zero at
    isolated scales, so descent stops only after two in a row."""
    rungs = []
    kappa = LOOP_SCALE_TOP
    small = 0
    for _ in range(80):
        specs, h = build(kappa)
        rungs.append((specs, h))
        small = small + 1 if abs(h) < 0.02 * tol else 0
        if small >= 2:
            break
        kappa *= LOOP_SCALE_RATIO
    return rungs


def _close_fiber(build, cur, rem, tol):
    """Append closed loops at cur until the fiber gap rem is below tol.

    Loops are built at geometrically descending scales and one is
    applied only when its holonomy divides the gap into at most
    LOOP_BUDGET repeats; a rung sitting on a holonomy zero is skipped
    rather than trusted.  Each applied rung leaves a gap smaller than
    its own holonomy, so repeat counts stay small as the scale
    descends.  No continuity of the holonomy in the scale is assumed:
    re-anchoring a chart across the seam can flip a preimage branch and
    jump the holonomy, which a root-finding closure would chase
    forever."""
    legs = []
    applied = 0
    kappa = LOOP_SCALE_TOP
    for _ in range(120):
        if abs(rem) <= tol:
            return legs, cur, rem
        specs, h = build(kappa)
        kappa *= LOOP_SCALE_RATIO
        if not 1e-15 < abs(h) <= abs(rem):
            continue
        n = int(abs(rem) // abs(h))
        if n > LOOP_BUDGET:
            continue
        if applied + n > LOOP_CAP:
            raise NotAccessibleNumerically(
                "fiber correction needs more than %d loops" % LOOP_CAP,
                achieved_error=abs(rem),
            )
        direction = 1 if np.sign(rem) == np.sign(h) else -1
        for _ in range(n):
            block, cur = _replay_loop(specs, cur, direction)
            rem -= direction * h
            legs.extend(block)
        applied += n
    raise NotAccessibleNumerically(
        "loop ladder exhausted with fiber gap %.3e" % abs(rem),
        achieved_error=abs(rem),
    )


def _detour_specs(F, cur, goal_base, policy, max_depth):
    """Replayable u+s legs from cur.base to goal_base.  Used to shuttle
    the path into a strong-holonomy region and back out; replaying with
    direction -1 retraces the same charts, so the fiber transport of the
    round trip cancels."""
    eig = F.base_map.eigen
    basis = np.column_stack([eig.v_u, eig.v_s])
    delta = wrapped_delta(goal_base, np.asarray(cur.base, dtype=float))
    tu, ts = np.linalg.solve(basis, delta)
    specs = []
    pt = cur
    for tau in _split_leg(float(tu), MAX_U_LEG):
        pre = sample_preorbit(F, pt, max_depth, policy)
        chart = UnstableLeafChart(F, pre, depth=min(max_depth, 40))
        end = chart.point(tau)
        specs.append(
            (
                "u",
                chart,
                0.0,
                tau,
                np.asarray(pt.base, dtype=float).copy(),
                np.asarray(end.base, dtype=float).copy(),
                float(chart.offset(tau)[0]),
            )
        )
        pt = end
    for tau in _split_leg(float(ts), MAX_S_LEG):
        chart = StableLeafChart(F, pt, depth=40)
        end = chart.point(tau)
        specs.append(
            (
                "s",
                chart,
                0.0,
                tau,
                np.asarray(pt.base, dtype=float).copy(),
                np.asarray(end.base, dtype=float).copy(),
                float(chart.offset(tau)[0]),
            )
        )
        pt = end
    return specs


def build_su_path(F, start, target, tol=1e-4, policy=None, max_depth=60):
    """Connect start to target by unstable and stable arcs.

    Base displacement is solved exactly in the eigenbasis and split into
    legs short enough for the chart series.  The leftover fiber gap is
    closed with su-quadrilateral loops whose holonomy is tuned by scale;
    when every loop at the junction is too weak for the gap, the path
    detours to the perturbation support, closes the gap there, and
    retraces the detour.  Raises NotAccessibleNumerically when no loop
    anywhere carries holonomy (products) or the gap cannot be closed
    under the loop cap.
    """
    if policy is None:
        policy = default_policy(F)
    if F.base_map.dim == 1:
        return _build_u_only_path(F, start, target, tol)
    legs = []
    cur = start
    delta = wrapped_delta(
        np.asarray(target.base, dtype=float), np.asarray(start.base, dtype=float)
    )
    eig = F.base_map.eigen
    basis = np.column_stack([eig.v_u, eig.v_s])
    tu, ts = np.linalg.solve(basis, delta)
    for tau in _split_leg(float(tu), MAX_U_LEG):
        leg, cur = _hop_u(F, cur, tau, policy, depth=max_depth)
        legs.append(leg)
    for tau in _split_leg(float(ts), MAX_S_LEG):
        leg, cur = _hop_s(F, cur, tau)
        legs.append(leg)
    rem = ((target.theta - cur.theta + 0.5) % 1.0) - 0.5
    if abs(rem) > tol:
        junction = cur

        def build(kappa):
            return _loop_proto(F, junction, kappa, kappa, policy)

        probe = _ladder_rungs(build, tol)
        h_max = max(abs(h) for _, h in probe)
        detour = None
        if h_max < 1e-12 or abs(rem) / max(h_max, 1e-300) > LOOP_BUDGET:
            if F.bump is None:
                raise NotAccessibleNumerically(
                    "no fiber holonomy available at the junction point",
                    achieved_error=abs(rem),
                )
            detour = _detour_specs(
                F, cur, np.asarray(F.bump.center, dtype=float), policy, max_depth
            )
            block, cur = _replay_loop(detour, cur, 1)
            legs.extend(block)
            strong = cur

            def build(kappa):
                return _loop_proto(F, strong, kappa, kappa, policy)

            probe = _ladder_rungs(build, tol)
            if max(abs(h) for _, h in probe) < 1e-12:
                raise NotAccessibleNumerically(
                    "no fiber holonomy available near the perturbation support",
                    achieved_error=abs(rem),
                )
        loop_legs, cur, rem = _close_fiber(build, cur, rem, tol)
        legs.extend(loop_legs)
        if detour is not None:
            block, cur = _replay_loop(detour, cur, -1)
            legs.extend(block)
        rem = ((target.theta - cur.theta + 0.5) % 1.0) - 0.5
    if abs(rem) > tol:
        raise NotAccessibleNumerically(
            "fiber gap %.3e above tolerance %.1e" % (abs(rem), tol),
            achieved_error=abs(rem),
        )
    return SuPath(legs, start, target)


def _u_only_proto(F, cur, t, policy_out, policy_back):
    """Out and back along two differently chosen unstable charts over a
    circle base; the mismatch of their fiber series is the loop
    holonomy.  Returns replayable leg specs and the net increment."""
    base0 = np.asarray(cur.base, dtype=float).copy()
    pre_out = sample_preorbit(F, cur, 60, policy_out)
    chart_out = UnstableLeafChart(F, pre_out, depth=40)
    d_out = chart_out.offset(t)[0]
    far_base = wrap(base0 + t * chart_out.v)
    far = FiberedPoint(far_base, (cur.theta + d_out) % 1.0)
    pre_back = sample_preorbit(F, far, 60, policy_back)
    chart_back = UnstableLeafChart(F, pre_back, depth=40)
    d_back = chart_back.offset(-t)[0]
    specs = [
        ("u", chart_out, 0.0, t, base0, far_base, d_out),
        ("u", chart_back, 0.0, -t, far_base, base0, d_back),
    ]
    return specs, d_out + d_back


def _build_u_only_path(F, start, target, tol):
    """Circle base: every leaf is unstable, so the path is u-legs only.
    Loops pair a stay-outside chart with a fixed-branch chart."""
    legs = []
    cur = start
    delta = float(
        wrapped_delta(
            np.asarray(target.base, dtype=float), np.asarray(start.base, dtype=float)
        )[0]
    )
    policy_a = default_policy(F)
    policy_b = FixedItinerary(0)
    for tau in _split_leg(delta, MAX_U_LEG):
        pre = sample_preorbit(F, cur, 60, policy_a)
        chart = UnstableLeafChart(F, pre, depth=40)
        end = chart.point(tau)
        legs.append(Leg("u", chart, 0.0, tau, cur, end))
        cur = end
    rem = ((target.theta - cur.theta + 0.5) % 1.0) - 0.5
    if abs(rem) > tol:
        junction = cur

        def build(kappa):
            return _u_only_proto(F, junction, kappa, policy_a, policy_b)

        probe = _ladder_rungs(build, tol)
        if max(abs(h) for _, h in probe) < 1e-12:
            raise NotAccessibleNumerically(
                "no fiber holonomy available at the junction point",
                achieved_error=abs(rem),
            )
        loop_legs, cur, rem = _close_fiber(build, cur, rem, tol)
        legs.extend(loop_legs)
        rem = ((target.theta - cur.theta + 0.5) % 1.0) - 0.5
    if abs(rem) > tol:
        raise NotAccessibleNumerically(
            "fiber gap %.3e above tolerance %.1e" % (abs(rem), tol),
            achieved_error=abs(rem),
        )
    return SuPath(legs, start, target)


def leaf_samples(F, x, ts, depth=70, policy=None):
    """Phase-space points of the invariant leaf through x at base
    parameters ts: the stable leaf on a torus base, the unstable leaf of
    a policy preorbit over a circle base.

    Unlike the chart classes the parameter is unbounded; displaced
    points wrap around the base, which the bump evaluation handles, and
    the geometric factors still contract the displacement below the
    support scale after finitely many terms.
    """
    ts = np.asarray(ts, dtype=float)
    eig = F.base_map.eigen
    x_base = np.asarray(x.base, dtype=float)
    offs = np.zeros(len(ts))
    if F.base_map.dim == 2:
        v, rate = eig.v_s, eig.a_s
        if F.bump is not None:
            orbit = np.empty((depth, 2))
            orbit[0] = x_base
            for n in range(1, depth):
                orbit[n] = F.base_map.apply(orbit[n - 1])
            vals_ref = F.bump.value_batch(orbit)
            scale = 1.0
            for n in range(depth):
                disp = orbit[n][None, :] + (ts * scale)[:, None] * v
                offs += vals_ref[n] - F.bump.value_batch(disp)
                scale *= rate
    else:
        v, rate = eig.v_u, eig.a_u
        if F.bump is not None:
            if policy is None:
                policy = default_policy(F)
            pre = sample_preorbit(F, x, depth, policy)
            past = pre.bases()[1:]
            vals_ref = F.bump.value_batch(past)
            scale = 1.0 / rate
            for n in range(depth):
                disp = past[n][None, :] + (ts * scale)[:, None] * v
                offs += F.bump.value_batch(disp) - vals_ref[n]
                scale /= rate
    bases = wrap(x_base[None, :] + ts[:, None] * v)
    thetas = (x.theta + offs) % 1.0
    return bases, thetas


def leaf_density_radius(F, x, arc_length, grid=20, spacing=0.02, depth=70, policy=None):
    """Covering radius of an invariant leaf sample in phase space.

    The leaf through x is sampled at base parameter steps of ``spacing``
    out to total length ``arc_length``.  The returned radius is the
    sup-distance from the worst grid cell center to the sample set,
    measured on a periodic occupancy lattice with grid cells per axis,
    so it upper-bounds the true covering radius by half a cell.
    """
    from scipy import ndimage

    half = arc_length / 2.0
    ts = np.arange(-half, half + spacing, spacing)
    bases, thetas = leaf_samples(F, x, ts, depth=depth, policy=policy)
    pts = np.column_stack([bases, thetas])
    dim = pts.shape[1]
    idx = np.floor(pts * grid).astype(int) % grid
    occ = np.zeros((grid,) * dim, dtype=bool)
    occ[tuple(idx.T)] = True
    # periodic chessboard distance: tile 3x per axis, read the center block
    tiled = np.tile(occ, (3,) * dim)
    dist = ndimage.distance_transform_cdt(~tiled, metric="chessboard")
    core = dist[(slice(grid, 2 * grid),) * dim]
    return float((core.max() + 0.5) / grid)
