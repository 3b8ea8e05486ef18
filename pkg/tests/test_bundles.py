import numpy as np
import pytest

from skewlab import (
    FiberedPoint,
    FixedItinerary,
    StayOutside,
    UniformRandom,
    ValidationError,
    sample_preorbit,
)
from skewlab.bundles import (
    estimate_center_direction,
    estimate_rates,
    estimate_splitting,
    estimate_stable_direction,
    estimate_unstable_direction,
    lyapunov_exponents,
    mean_center_exponent,
    pesin_entropy_estimate,
    proj_angle,
    unstable_direction_spread,
)
from conftest import LOG_A_U, LOG_A_S, A_U

LN2 = np.log(2.0)
ORIGIN = FiberedPoint(np.zeros(2), 0.0)
ANALYTIC_SPREAD = 0.006064103574048756  # |atan(eps/(1+sqrt2)) - atan(eps/(2+sqrt2))|


def _power_iteration_unstable(F, pre):
    """Push a generic vector forward through the derivative cocycle along
    the preorbit; the expansion gap makes it converge to the unstable
    direction at the anchor."""
    w = np.array([0.3, 0.7, 0.4])
    for k in range(pre.depth, 0, -1):
        w = F.derivative(pre.point_at(k)) @ w
        w = w / np.linalg.norm(w)
    return w


def _pullback_iteration_stable(F, x, n):
    """Pull a generic vector back from the far future; the inverse cocycle
    expands the stable direction fastest."""
    orbit = [x]
    for _ in range(n):
        orbit.append(F.apply(orbit[-1]))
    w = np.array([0.6, -0.2, 0.5])
    for k in range(n - 1, -1, -1):
        w = F.derivative_inverse(orbit[k]) @ w
        w = w / np.linalg.norm(w)
    return w


def test_unstable_direction_matches_power_iteration(coupled_F, rng):
    for seed in range(3):
        anchor = FiberedPoint(rng.uniform(size=2), rng.uniform())
        pre = sample_preorbit(coupled_F, anchor, 60, UniformRandom(seed))
        est, resid = estimate_unstable_direction(coupled_F, pre)
        oracle = _power_iteration_unstable(coupled_F, pre)
        assert resid < 1e-10
        assert proj_angle(est, oracle) < 1e-10


def test_unstable_fiber_slope_closed_form_at_origin(coupled_F):
    pre = sample_preorbit(coupled_F, ORIGIN, 60, FixedItinerary(0))
    e, _ = estimate_unstable_direction(coupled_F, pre)
    v_u = coupled_F.base_map.eigen.v_u
    slope = float(e[2] / (e[:2] @ v_u))
    assert slope == pytest.approx(0.05 / (1.0 + np.sqrt(2.0)), abs=1e-12)


def test_stable_direction_matches_pullback_iteration(coupled_F, rng):
    x = FiberedPoint(rng.uniform(size=2), rng.uniform())
    est, resid = estimate_stable_direction(coupled_F, x, 80)
    oracle = _pullback_iteration_stable(coupled_F, x, 80)
    assert resid < 1e-6
    assert proj_angle(est, oracle) < 1e-10


def test_product_stable_direction_is_base_eigenvector(product_F):
    x = FiberedPoint(np.array([0.3, 0.8]), 0.1)
    e, _ = estimate_stable_direction(product_F, x, 80)
    v = np.append(product_F.base_map.eigen.v_s, 0.0)
    assert proj_angle(e, v) < 1e-12


def test_center_direction_is_fiber(coupled_F, doubling_F, rng):
    for F in (coupled_F, doubling_F):
        d = F.base_map.dim
        x = FiberedPoint(rng.uniform(size=d), rng.uniform())
        pre = sample_preorbit(F, x, 50, UniformRandom(0))
        e, _ = estimate_center_direction(F, x, pre, 50)
        fiber = np.zeros(d + 1)
        fiber[-1] = 1.0
        assert proj_angle(e, fiber) < 1e-12


def test_splitting_residuals_small(coupled_F, product_F, doubling_F, rng):
    for F in (coupled_F, product_F):
        x = FiberedPoint(rng.uniform(size=2), rng.uniform())
        pre = sample_preorbit(F, x, 60, UniformRandom(1))
        split = estimate_splitting(F, x, pre)
        assert max(split.residuals.values()) < 1e-9
    x1 = FiberedPoint(rng.uniform(size=1), rng.uniform())
    pre1 = sample_preorbit(doubling_F, x1, 60, UniformRandom(1))
    with pytest.raises(ValidationError):
        estimate_splitting(doubling_F, x1, pre1)


def test_splitting_directions_are_invariant_one_step(coupled_F, rng):
    x = FiberedPoint(rng.uniform(size=2), rng.uniform())
    pre = sample_preorbit(coupled_F, x, 60, UniformRandom(2))
    split = estimate_splitting(coupled_F, x, pre)
    x1 = coupled_F.apply(x)
    pre1 = pre.extended_by_image()
    split1 = estimate_splitting(coupled_F, x1, pre1)
    J = coupled_F.derivative(x)
    assert proj_angle(J @ split.e_u, split1.e_u) < 1e-9
    assert proj_angle(J @ split.e_s, split1.e_s) < 1e-9
    assert proj_angle(J @ split.e_c, split1.e_c) < 1e-12


def test_lyapunov_exponents_coupled(coupled_F):
    t = lyapunov_exponents(coupled_F, FiberedPoint(np.array([0.2, 0.7]), 0.0), 100000)
    assert t.lam_u == pytest.approx(LOG_A_U, abs=1e-4)
    assert t.lam_s == pytest.approx(LOG_A_S, abs=1e-4)
    assert t.lam_c == 0.0
    assert t.total() == pytest.approx(LN2, abs=1e-8)
    assert t.se[1] == 0.0 and t.se[2] > 0.0


def test_lyapunov_exponents_doubling(doubling_F):
    t = lyapunov_exponents(doubling_F, FiberedPoint(np.array([0.2]), 0.0), 50000)
    assert t.lam_s is None
    assert t.lam_u == pytest.approx(LN2, abs=1e-9)
    assert t.lam_c == 0.0


def test_lyapunov_rejects_tiny_n(coupled_F):
    with pytest.raises(ValueError):
        lyapunov_exponents(coupled_F, ORIGIN, 4)


def test_mean_center_exponent_near_zero(coupled_F, product_F):
    mc, se = mean_center_exponent(coupled_F, 40, 800, seed=1)
    assert abs(mc) < 2e-3
    assert se >= 0.0
    mc0, _ = mean_center_exponent(product_F, 40, 800, seed=1)
    assert abs(mc0) < 1e-12


def test_pesin_entropy_quick(coupled_F):
    h, se = pesin_entropy_estimate(coupled_F, 40, 800, seed=1)
    assert h == pytest.approx(LOG_A_U, abs=2e-3)


def test_spread_analytic_dichotomy(coupled_F, product_F):
    pre_fix = sample_preorbit(coupled_F, ORIGIN, 60, FixedItinerary(0))
    pre_out = sample_preorbit(coupled_F, ORIGIN, 60, StayOutside(coupled_F.bump))
    spread = unstable_direction_spread(coupled_F, [pre_fix, pre_out])
    assert spread == pytest.approx(ANALYTIC_SPREAD, abs=1e-9)
    q_fix = sample_preorbit(product_F, ORIGIN, 60, FixedItinerary(0))
    q_out = sample_preorbit(product_F, ORIGIN, 60, FixedItinerary(1))
    assert unstable_direction_spread(product_F, [q_fix, q_out]) < 1e-10


def test_rate_estimates_certify(coupled_F):
    rates = estimate_rates(coupled_F, FiberedPoint(np.array([0.2, 0.7]), 0.0))
    assert rates.nu < 1.0 < rates.mu
    assert rates.nu < rates.gamma1 <= rates.gamma2 < rates.mu
    assert rates.gamma1 == pytest.approx(1.0, abs=1e-6)
    assert rates.mu == pytest.approx(A_U, rel=0.05)
    assert rates.certifies_partial_hyperbolicity()


def test_proj_angle_basics():
    assert proj_angle(np.array([1.0, 0, 0]), np.array([2.0, 0, 0])) < 1e-12
    assert proj_angle(np.array([1.0, 0, 0]), np.array([-3.0, 0, 0])) < 1e-12
    assert proj_angle(np.array([1.0, 0, 0]), np.array([0.0, 1.0, 0])) == pytest.approx(
        np.pi / 2, abs=1e-12
    )
