import numpy as np
import pytest

from skewlab import (
    BumpFunction,
    ExpandingCircleMap,
    LinearToralEndomorphism,
    NotHyperbolic,
    circle_dist,
    torus_dist,
    wrap,
    wrapped_delta,
)
from conftest import A_S, A_U


def test_wrap_range(rng):
    pts = rng.uniform(-4.0, 4.0, size=(200, 2))
    w = wrap(pts)
    assert np.all((0.0 <= w) & (w < 1.0))
    assert np.allclose(np.sin(2 * np.pi * w), np.sin(2 * np.pi * pts), atol=1e-12)


def test_wrapped_delta_is_representative(rng):
    p = rng.uniform(size=(300, 2))
    q = rng.uniform(size=(300, 2))
    d = wrapped_delta(p, q)
    assert np.max(np.abs(d)) <= 0.5
    assert np.allclose(wrap(q + d), wrap(p), atol=1e-12)


def test_torus_dist_metric(rng):
    p, q, r = rng.uniform(size=(3, 2))
    assert torus_dist(p, p) == 0.0
    assert torus_dist(p, q) == pytest.approx(torus_dist(q, p), abs=1e-15)
    assert torus_dist(p, r) <= torus_dist(p, q) + torus_dist(q, r) + 1e-12
    assert torus_dist(np.array([0.99, 0.0]), np.array([0.01, 0.0])) == pytest.approx(
        0.02, abs=1e-15
    )


def test_circle_dist_wraps():
    assert circle_dist(0.95, 0.05) == pytest.approx(0.1, abs=1e-15)
    assert circle_dist(0.3, 0.3) == 0.0


def test_eigen_against_numpy(cat_map):
    vals = np.linalg.eigvals(cat_map.matrix)
    assert cat_map.eigen.a_u == pytest.approx(max(vals), abs=1e-13)
    assert cat_map.eigen.a_s == pytest.approx(min(vals), abs=1e-13)
    assert cat_map.eigen.a_u == pytest.approx(A_U, abs=1e-13)
    assert cat_map.eigen.a_s == pytest.approx(A_S, abs=1e-13)
    for v, lam in ((cat_map.eigen.v_u, A_U), (cat_map.eigen.v_s, A_S)):
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-14)
        assert np.allclose(cat_map.matrix @ v, lam * v, atol=1e-13)
    assert cat_map.eigen.a_s * cat_map.eigen.a_u == pytest.approx(2.0, abs=1e-13)


def test_degree_and_determinant(cat_map):
    assert cat_map.degree == 2
    assert cat_map.det == 2.0


def test_kernel_translates(cat_map):
    ker = cat_map.kernel_translates()
    assert len(ker) == 2
    assert np.allclose(ker[0], [0.0, 0.0])
    assert np.allclose(ker[1], [0.5, 0.5])
    assert cat_map.branch_separation() == pytest.approx(0.5, abs=1e-14)


def _scan_preimages_oracle(m, y):
    """Brute-force preimage scan over integer offsets, independent of the
    class implementation."""
    inv = np.linalg.inv(m)
    found = []
    for kx in range(-1, 5):
        for ky in range(-1, 5):
            x = wrap(inv @ (y + np.array([kx, ky], dtype=float)))
            if torus_dist(wrap(m @ x), y) > 1e-10:
                continue
            if all(torus_dist(x, f) > 1e-9 for f in found):
                found.append(x)
    return sorted(found, key=lambda q: (q[0], q[1]))


def test_preimages_match_scan_oracle(cat_map, rng):
    for _ in range(50):
        y = rng.uniform(size=2)
        got = cat_map.preimages(y)
        want = _scan_preimages_oracle(cat_map.matrix, y)
        assert len(got) == len(want) == 2
        for g, w in zip(got, want):
            assert torus_dist(g, w) < 1e-12
        for g in got:
            assert torus_dist(cat_map.apply(g), y) < 1e-12


def test_unimodular_matrix_has_one_preimage():
    m = LinearToralEndomorphism([[2, 1], [1, 1]])
    assert m.degree == 1
    pre = m.preimages(np.array([0.3, 0.7]))
    assert len(pre) == 1
    assert torus_dist(m.apply(pre[0]), np.array([0.3, 0.7])) < 1e-12


def test_non_hyperbolic_matrices_rejected():
    with pytest.raises(NotHyperbolic):
        LinearToralEndomorphism([[1, 0], [0, 1]])
    with pytest.raises(NotHyperbolic):
        LinearToralEndomorphism([[0, 1], [1, 0]])
    with pytest.raises(NotHyperbolic):
        LinearToralEndomorphism([[0, -1], [1, 0]])
    with pytest.raises(ValueError):
        LinearToralEndomorphism([[1, 0], [0, 0]])


def test_apply_batch_agrees_with_apply(cat_map, rng):
    pts = rng.uniform(size=(100, 2))
    batch = cat_map.apply_batch(pts)
    for p, b in zip(pts, batch):
        assert torus_dist(cat_map.apply(p), b) < 1e-14


def test_circle_map_preimages():
    m = ExpandingCircleMap(2)
    y = np.array([0.3])
    pre = m.preimages(y)
    assert len(pre) == 2
    want = sorted([0.15, 0.65])
    for p, w in zip(sorted(float(q[0]) for q in pre), want):
        assert p == pytest.approx(w, abs=1e-14)
    for q in pre:
        assert circle_dist(float(m.apply(q)[0]), 0.3) < 1e-14
    assert m.branch_separation() == pytest.approx(0.5, abs=1e-14)
    assert m.degree == 2


def test_circle_map_rejects_non_expanding():
    with pytest.raises((NotHyperbolic, ValueError)):
        ExpandingCircleMap(1)


# bump recipe: frozen scan values for the shipped parameters
SUP_PHI = 0.00269230648795637
INT_PHI_SQ = 1.0871697676931546e-07


def test_bump_gradient_matches_finite_differences(cat_map, rng):
    bump = BumpFunction.default_for(cat_map)
    h = 1e-6
    pts = rng.uniform(-0.2, 0.2, size=(200, 2))
    pts = np.vstack([pts, np.zeros(2)])
    for p in pts:
        g = bump.grad(p)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (bump.value(p + e) - bump.value(p - e)) / (2 * h)
            assert abs(g[i] - fd) < 1e-6


def test_bump_gradient_at_center_is_amplitude_times_direction(cat_map):
    bump = BumpFunction.default_for(cat_map)
    g = bump.grad(np.zeros(2))
    assert np.allclose(g, 0.05 * cat_map.eigen.v_u, atol=1e-14)


def test_bump_vanishes_outside_support(cat_map, rng):
    bump = BumpFunction.default_for(cat_map)
    for _ in range(200):
        p = rng.uniform(size=2)
        d = wrapped_delta(p, np.zeros(2))
        if np.linalg.norm(d) >= 0.15:
            assert bump.value(p) == 0.0
            assert np.all(bump.grad(p) == 0.0)
            assert not bump.in_support(p)


def test_bump_is_c1_at_the_support_edge(cat_map):
    bump = BumpFunction.default_for(cat_map)
    v = np.array([1.0, 0.0])
    for r in (0.1499, 0.14999, 0.149999):
        p = r * v
        assert abs(bump.value(p)) < 1e-8
        assert np.max(np.abs(bump.grad(p))) < 1e-4


def test_bump_periodic_wrapping(cat_map):
    bump = BumpFunction.default_for(cat_map)
    p = np.array([0.95, 0.02])
    q = np.array([-0.05, 0.02])
    assert bump.value(p) == pytest.approx(bump.value(q), abs=1e-15)
    assert np.allclose(bump.grad(p), bump.grad(q), atol=1e-15)


def test_bump_scan_extremes_frozen(cat_map):
    bump = BumpFunction.default_for(cat_map)
    g = np.linspace(-0.15, 0.15, 2001)
    X, Y = np.meshgrid(g, g)
    vals = bump.value_batch(np.column_stack([X.ravel(), Y.ravel()]))
    assert float(np.abs(vals).max()) == pytest.approx(SUP_PHI, rel=1e-12)
    h = np.linspace(-0.15, 0.15, 3001)[:-1] + 0.15 / 3000
    Xh, Yh = np.meshgrid(h, h)
    v2 = bump.value_batch(np.column_stack([Xh.ravel(), Yh.ravel()])) ** 2
    assert float(v2.sum() * (0.3 / 3000) ** 2) == pytest.approx(INT_PHI_SQ, rel=1e-9)


def test_bump_value_batch_matches_value(cat_map, rng):
    bump = BumpFunction.default_for(cat_map)
    pts = rng.uniform(-0.2, 0.2, size=(50, 2))
    vb = bump.value_batch(pts)
    for p, v in zip(pts, vb):
        assert bump.value(p) == pytest.approx(float(v), abs=1e-16)
