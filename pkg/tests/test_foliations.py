import numpy as np
import pytest

from skewlab import (
    FiberedPoint,
    FixedItinerary,
    NotAccessibleNumerically,
    QuadrilateralSpec,
    StableLeafChart,
    UniformRandom,
    UnstableLeafChart,
    bisection_additivity_defect,
    build_su_path,
    fibered_dist,
    integrability_defect,
    leaf_density_radius,
    leaf_samples,
    quadrilateral_holonomy,
    sample_preorbit,
    torus_dist,
    u_loop_holonomy,
)
from skewlab.foliations import stable_fiber_offset, unstable_fiber_offset
from conftest import A_S, A_U, LOG_A_S


def test_stable_chart_one_step_invariance(coupled_F, rng):
    worst = 0.0
    for _ in range(15):
        anchor = FiberedPoint(rng.uniform(size=2), rng.uniform())
        chart = StableLeafChart(coupled_F, anchor, depth=50)
        chart_im = StableLeafChart(coupled_F, coupled_F.apply(anchor), depth=50)
        for t in (-0.3, -0.05, 0.02, 0.25):
            img = coupled_F.apply(chart.point(t))
            worst = max(worst, fibered_dist(img, chart_im.point(t * A_S)))
    assert worst < 1e-12


def test_unstable_chart_one_step_invariance(coupled_F, rng):
    worst = 0.0
    for seed in range(10):
        anchor = FiberedPoint(rng.uniform(size=2), rng.uniform())
        pre = sample_preorbit(coupled_F, anchor, 60, UniformRandom(seed))
        chart = UnstableLeafChart(coupled_F, pre, depth=40)
        chart_im = UnstableLeafChart(coupled_F, pre.extended_by_image(), depth=40)
        for t in (-0.08, 0.01, 0.07):
            img = coupled_F.apply(chart.point(t))
            worst = max(worst, fibered_dist(img, chart_im.point(t * A_U)))
    assert worst < 1e-12


def test_chart_offsets_vanish_at_zero(coupled_F, rng):
    anchor = FiberedPoint(rng.uniform(size=2), rng.uniform())
    s_chart = StableLeafChart(coupled_F, anchor, depth=40)
    pre = sample_preorbit(coupled_F, anchor, 60, UniformRandom(0))
    u_chart = UnstableLeafChart(coupled_F, pre, depth=40)
    assert s_chart.offset(0.0)[0] == 0.0
    assert u_chart.offset(0.0)[0] == 0.0
    assert fibered_dist(s_chart.point(0.0), anchor) == 0.0
    assert fibered_dist(u_chart.point(0.0), anchor) == 0.0


def test_product_charts_carry_no_fiber_offset(product_F, rng):
    anchor = FiberedPoint(rng.uniform(size=2), rng.uniform())
    s_chart = StableLeafChart(product_F, anchor, depth=40)
    pre = sample_preorbit(product_F, anchor, 60, FixedItinerary(0))
    u_chart = UnstableLeafChart(product_F, pre, depth=40)
    ts = np.linspace(-0.3, 0.3, 13)
    assert np.max(np.abs(s_chart.offsets(ts)[0])) == 0.0
    assert np.max(np.abs(u_chart.offsets(ts)[0])) == 0.0


def test_offset_helpers_match_charts(coupled_F, rng):
    anchor = FiberedPoint(rng.uniform(size=2), rng.uniform())
    t = 0.11
    chart = StableLeafChart(coupled_F, anchor, depth=40)
    other = (anchor.base + t * coupled_F.base_map.eigen.v_s) % 1.0
    off, tail = stable_fiber_offset(coupled_F, anchor, other)
    assert off == pytest.approx(float(chart.offset(t)[0]), abs=1e-13)
    assert tail < 1e-10
    pre = sample_preorbit(coupled_F, anchor, 60, UniformRandom(4))
    u_chart = UnstableLeafChart(coupled_F, pre, depth=40)
    other_u = (anchor.base + t * u_chart.v) % 1.0
    off_u, _ = unstable_fiber_offset(coupled_F, pre, other_u)
    assert off_u == pytest.approx(float(u_chart.offset(t)[0]), abs=1e-13)


def test_product_holonomy_vanishes(product_F, rng):
    x = FiberedPoint(rng.uniform(size=2), rng.uniform())
    for t in (0.05, 0.15, 0.3):
        for s in (0.08, 0.2, 0.35):
            quad = QuadrilateralSpec(x, t, s)
            assert abs(quadrilateral_holonomy(product_F, quad)) < 1e-12


def test_holonomy_reversal_negates(coupled_F):
    x = FiberedPoint(np.zeros(2), 0.0)
    quad = QuadrilateralSpec(x, 0.3, 0.25)
    h = quadrilateral_holonomy(coupled_F, quad)
    h_rev = quadrilateral_holonomy(coupled_F, quad, reverse=True)
    assert h_rev == pytest.approx(-h, abs=1e-15)
    assert abs(h) > 1e-6


def test_holonomy_tail_bound_is_small(coupled_F):
    quad = QuadrilateralSpec(FiberedPoint(np.zeros(2), 0.0), 0.2, 0.2)
    h, tail = quadrilateral_holonomy(coupled_F, quad, with_tail=True)
    assert tail < 1e-10
    assert abs(h) > tail


def test_bisection_additivity(coupled_F):
    for t, s in ((0.4, 0.4), (0.25, 0.1), (0.12, 0.3)):
        quad = QuadrilateralSpec(FiberedPoint(np.zeros(2), 0.0), t, s)
        assert bisection_additivity_defect(coupled_F, quad) < 1e-10


def test_integrability_defect_dichotomy(coupled_F, product_F):
    x = FiberedPoint(np.zeros(2), 0.0)
    scales = np.linspace(0.05, 0.4, 4)
    assert integrability_defect(coupled_F, x, scales) > 1e-6
    assert integrability_defect(product_F, x, scales) < 1e-12


def test_u_loop_holonomy_doubling(doubling_F):
    x = FiberedPoint(np.array([0.0]), 0.0)
    h = u_loop_holonomy(doubling_F, x, 0.2)
    assert abs(h) > 1e-6


def test_u_loop_holonomy_product_circle():
    from skewlab import ExpandingCircleMap, RotationExtension

    F0 = RotationExtension(ExpandingCircleMap(2), None)
    x = FiberedPoint(np.array([0.3]), 0.2)
    assert abs(u_loop_holonomy(F0, x, 0.2)) < 1e-15


def test_su_path_reaches_targets(coupled_F, rng):
    start = FiberedPoint(np.zeros(2), 0.0)
    for _ in range(3):
        target = FiberedPoint(rng.uniform(size=2), rng.uniform())
        path = build_su_path(coupled_F, start, target, tol=1e-4)
        end = path.endpoint()
        assert torus_dist(end.base, target.base) < 1e-9
        assert abs(((target.theta - end.theta + 0.5) % 1.0) - 0.5) <= 1e-4
        assert path.verify() < 1e-9
        assert all(leg.residual() < 1e-9 for leg in path.legs)


def test_su_path_is_deterministic(coupled_F):
    start = FiberedPoint(np.zeros(2), 0.0)
    target = FiberedPoint(np.array([0.37, 0.81]), 0.64)
    p1 = build_su_path(coupled_F, start, target, tol=1e-4)
    p2 = build_su_path(coupled_F, start, target, tol=1e-4)
    assert p1.leg_count() == p2.leg_count()
    assert fibered_dist(p1.endpoint(), p2.endpoint()) == 0.0


def test_su_path_product_rejects_fiber_shift(product_F):
    start = FiberedPoint(np.array([0.1, 0.2]), 0.3)
    target = FiberedPoint(np.array([0.7, 0.5]), 0.9)
    with pytest.raises(NotAccessibleNumerically) as exc:
        build_su_path(product_F, start, target, tol=1e-4)
    assert exc.value.achieved_error is not None
    assert exc.value.achieved_error > 1e-4


def test_su_path_product_reaches_base_only_displacement(product_F):
    start = FiberedPoint(np.array([0.1, 0.2]), 0.3)
    chart = StableLeafChart(product_F, start, depth=40)
    pre = sample_preorbit(product_F, start, 60, FixedItinerary(0))
    u_chart = UnstableLeafChart(product_F, pre, depth=40)
    mid = u_chart.point(0.2)
    target = StableLeafChart(product_F, mid, depth=40).point(0.15)
    assert target.theta == start.theta
    path = build_su_path(product_F, start, target, tol=1e-4)
    assert fibered_dist(path.endpoint(), target) < 1e-9
    assert chart is not None


def test_u_only_path_doubling(doubling_F, rng):
    start = FiberedPoint(np.array([0.0]), 0.0)
    for _ in range(2):
        target = FiberedPoint(rng.uniform(size=1), rng.uniform())
        path = build_su_path(doubling_F, start, target, tol=1e-4)
        end = path.endpoint()
        assert torus_dist(end.base, target.base) < 1e-9
        assert abs(((target.theta - end.theta + 0.5) % 1.0) - 0.5) <= 1e-4
        assert all(leg.kind == "u" for leg in path.legs)
    shifted = FiberedPoint(np.array([0.0]), 0.37)
    path = build_su_path(doubling_F, start, shifted, tol=1e-4)
    assert abs(((0.37 - path.endpoint().theta + 0.5) % 1.0) - 0.5) <= 1e-4


def test_leaf_samples_match_charts_locally(coupled_F, rng):
    anchor = FiberedPoint(rng.uniform(size=2), rng.uniform())
    ts = np.array([-0.2, -0.01, 0.13, 0.3])
    bases, thetas = leaf_samples(coupled_F, anchor, ts)
    chart = StableLeafChart(coupled_F, anchor, depth=70)
    for t, b, th in zip(ts, bases, thetas):
        p = chart.point(t)
        assert torus_dist(b, p.base) < 1e-12
        assert abs(((th - p.theta + 0.5) % 1.0) - 0.5) < 1e-12


def test_leaf_samples_wrap_beyond_unit_length(coupled_F):
    anchor = FiberedPoint(np.array([0.3, 0.4]), 0.1)
    bases, thetas = leaf_samples(coupled_F, anchor, np.array([-3.7, 2.9]))
    assert np.all((0.0 <= bases) & (bases < 1.0))
    assert np.all((0.0 <= thetas) & (thetas < 1.0))


def test_leaf_density_radius_product_stays_large(product_F):
    anchor = FiberedPoint(np.array([0.2, 0.7]), 0.0)
    r = leaf_density_radius(product_F, anchor, 500, grid=10)
    assert r >= 0.2


def test_stable_pairs_contract_at_the_stable_rate(coupled_F, rng):
    anchor = FiberedPoint(rng.uniform(size=2), rng.uniform())
    chart = StableLeafChart(coupled_F, anchor, depth=60)
    p, q = anchor, chart.point(0.01)
    dists = []
    for _ in range(13):
        dists.append(fibered_dist(p, q))
        p, q = coupled_F.apply(p), coupled_F.apply(q)
    slope = np.polyfit(np.arange(13), np.log(dists), 1)[0]
    assert abs(slope / LOG_A_S - 1.0) < 0.05
