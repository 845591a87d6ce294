"""Bound calculators: algebra cross-checks, guard enforcement, limit behavior.

Frozen oracles (computed independently with exact rational arithmetic):
  * constants at (L=1, K=2, eta=1/32, beta=1/2, sigma=zeta=B=1), guards off:
      gamma = -1/6, alpha = -1025/256, xi = -1225/1024.
    The same point violates the second stepsize guard
    (64 L^2 K^2 eta^2 + 64 L K eta = 4.25 >= 1), so guards must reject it.
  * guard-passing point (L=1, K=1, eta=0.01, beta=0, sigma=zeta=B=1):
      gamma = 0.003536, alpha = 1.1425339366515836,
      xi = 0.013161990950226245; with gap=1, T=100, rate=0.5 the bound is
      6.851290497737557.
  * c_lambda(0.5) = 5.078537262337872,
    c_lambda_lemma(0.5) = 4.72785594055507.
  * stability at (L=1, K=2, c=0.5, rate=0.5, sigma=B=loss_sup=1, n=10,
    m=100, T=100): c*L*K = 1 so the exponent is 1/2 and the head term is
    exactly sqrt(100) * (2/100 + 2/10) = 2.2; total 24.514149049351488.
"""

import math

import numpy as np
import pytest

from dflmesh.bounds import (
    BoundParams,
    c_lambda,
    c_lambda_lemma,
    convergence_bound,
    convergence_constants,
    stability_bound,
    stepsize_sum_worst_ratio,
)
from dflmesh.errors import BoundGuardError


def params(**kw):
    base = dict(smoothness=1.0, local_steps=2, rounds=100)
    base.update(kw)
    return BoundParams(**base)


# -- BoundParams validation -----------------------------------------------------


def test_bound_params_validation():
    with pytest.raises(ValueError, match="smoothness"):
        params(smoothness=0.0)
    with pytest.raises(ValueError, match="local_steps"):
        params(local_steps=0)
    with pytest.raises(ValueError, match="rounds"):
        params(rounds=0)
    with pytest.raises(ValueError, match="momentum"):
        params(momentum=1.0)
    with pytest.raises(ValueError, match="mixing_rate"):
        params(mixing_rate=0.0)
    with pytest.raises(ValueError, match="mixing_rate"):
        params(mixing_rate=1.0)
    with pytest.raises(ValueError, match="noise_bound"):
        params(noise_bound=-1.0)
    with pytest.raises(ValueError, match="stepsize must be"):
        params(stepsize=0.0)
    with pytest.raises(ValueError, match="stepsize_scale"):
        params(stepsize_scale=-0.5)
    with pytest.raises(ValueError, match="num_nodes"):
        params(num_nodes=0)


# -- convergence constants --------------------------------------------------------


CROSS_CHECK = dict(
    smoothness=1.0,
    local_steps=2,
    rounds=100,
    momentum=0.5,
    stepsize=1.0 / 32.0,
    noise_bound=1.0,
    heterogeneity_bound=1.0,
    grad_bound=1.0,
)


def test_constants_match_frozen_rationals_guards_off():
    gamma, alpha, xi = convergence_constants(
        BoundParams(**CROSS_CHECK), check_guards=False
    )
    assert gamma == pytest.approx(-1.0 / 6.0, abs=1e-15)
    assert alpha == pytest.approx(-1025.0 / 256.0, abs=1e-12)
    assert xi == pytest.approx(-1225.0 / 1024.0, abs=1e-12)


def test_cross_check_point_violates_quadratic_guard():
    with pytest.raises(BoundGuardError, match="64 L"):
        convergence_constants(BoundParams(**CROSS_CHECK))


def test_first_guard_is_the_eta_cap():
    p = params(stepsize=0.2, local_steps=2)  # 1/(8LK) = 1/16
    with pytest.raises(BoundGuardError, match=r"1/\(8LK\)"):
        convergence_constants(p)


def test_guard_passing_point_frozen_values():
    p = BoundParams(
        smoothness=1.0,
        local_steps=1,
        rounds=100,
        momentum=0.0,
        stepsize=0.01,
        noise_bound=1.0,
        heterogeneity_bound=1.0,
        grad_bound=1.0,
        mixing_rate=0.5,
        initial_gap=1.0,
    )
    gamma, alpha, xi = convergence_constants(p)
    assert gamma == pytest.approx(0.003536, abs=1e-15)
    assert alpha == pytest.approx(1.1425339366515836, rel=1e-12)
    assert xi == pytest.approx(0.013161990950226245, rel=1e-12)
    assert convergence_bound(p) == pytest.approx(6.851290497737557, rel=1e-12)


def test_gamma_over_eta_tends_to_local_steps():
    # as eta -> 0 with beta = 0 the leading term of gamma is eta * K
    for k in (1, 3, 5):
        p = params(local_steps=k, stepsize=1e-9, smoothness=2.0)
        gamma, _, _ = convergence_constants(p, check_guards=False)
        assert gamma / 1e-9 == pytest.approx(k, rel=1e-6)


def test_alpha_xi_zero_in_noiseless_homogeneous_case():
    p = params(stepsize=0.001, momentum=0.0)
    gamma, alpha, xi = convergence_constants(p)
    assert gamma > 0
    assert alpha == 0.0
    assert xi == 0.0
    # bound then reduces to the optimization term alone
    p2 = params(stepsize=0.001, initial_gap=3.0, mixing_rate=0.9)
    assert convergence_bound(p2) == pytest.approx(
        2.0 * 3.0 / (gamma * 100), rel=1e-12
    )


def test_bound_monotone_in_problem_constants():
    def bound(**kw):
        base = dict(
            smoothness=1.0,
            local_steps=1,
            rounds=50,
            stepsize=0.01,
            noise_bound=1.0,
            heterogeneity_bound=1.0,
            grad_bound=1.0,
            mixing_rate=0.5,
            initial_gap=1.0,
        )
        base.update(kw)
        return convergence_bound(BoundParams(**base))

    ref = bound()
    assert bound(mixing_rate=0.9) > ref      # worse topology
    assert bound(noise_bound=2.0) > ref      # noisier gradients
    assert bound(heterogeneity_bound=2.0) > ref
    assert bound(rounds=5000) < ref          # longer runs shrink the gap term


def test_bound_limit_is_alpha_plus_topology_term():
    p = BoundParams(
        smoothness=1.0,
        local_steps=1,
        rounds=10**12,
        stepsize=0.01,
        noise_bound=1.0,
        heterogeneity_bound=1.0,
        grad_bound=1.0,
        mixing_rate=0.5,
        initial_gap=1.0,
    )
    _, alpha, xi = convergence_constants(p)
    floor = alpha + xi / 0.25
    assert convergence_bound(p) == pytest.approx(floor, rel=1e-9)


def test_constants_need_constant_stepsize():
    with pytest.raises(ValueError, match="constant stepsize"):
        convergence_constants(params())


# -- c_lambda ----------------------------------------------------------------------


def test_c_lambda_oracle_and_domain():
    assert c_lambda(0.5) == pytest.approx(5.078537262337872, abs=1e-12)
    for bad in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            c_lambda(bad)


def test_c_lambda_increasing_in_rate():
    grid = np.linspace(0.05, 0.95, 19)
    vals = [c_lambda(float(r)) for r in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_c_lambda_blows_up_near_one():
    assert c_lambda(0.999) > 1000.0


def test_c_lambda_lemma_oracle_and_domain():
    assert c_lambda_lemma(0.5) == pytest.approx(4.72785594055507, abs=1e-12)
    with pytest.raises(ValueError):
        c_lambda_lemma(1.0)
    # min-terms keep the value finite and positive at both extremes
    assert 0.0 < c_lambda_lemma(1e-6) < 1.0
    assert c_lambda_lemma(0.999) < 2100.0


# -- stability bound -----------------------------------------------------------------


STABILITY_POINT = dict(
    smoothness=1.0,
    local_steps=2,
    rounds=100,
    mixing_rate=0.5,
    noise_bound=1.0,
    grad_bound=1.0,
    stepsize_scale=0.5,
    num_nodes=10,
    local_data_size=100,
    loss_sup=1.0,
)


def test_stability_frozen_oracle():
    val = stability_bound(BoundParams(**STABILITY_POINT))
    # c L K = 1 -> exponent 1/2; head = 10 * (0.02 + 0.2) = 2.2 exactly
    tail = 1.0 * 2.0 * (0.5 * 2.0 + 2.0 * c_lambda(0.5)) / 1.0
    assert val == pytest.approx(2.2 + tail, rel=1e-12)
    assert val == pytest.approx(24.514149049351488, rel=1e-12)


def test_stability_single_round_drops_growth_factor():
    p = dict(STABILITY_POINT, rounds=1)
    val = stability_bound(BoundParams(**p))
    # T = 1: the T^expo factor is 1, leaving head = 0.02 + 0.2
    tail = 2.0 * (1.0 + 2.0 * c_lambda(0.5))
    assert val == pytest.approx(0.22 + tail, rel=1e-12)


def test_stability_monotone_in_mixing_rate():
    lo = stability_bound(BoundParams(**dict(STABILITY_POINT, mixing_rate=0.2)))
    hi = stability_bound(BoundParams(**dict(STABILITY_POINT, mixing_rate=0.8)))
    assert hi > lo


def test_stability_sublinear_in_rounds():
    t1 = stability_bound(BoundParams(**dict(STABILITY_POINT, rounds=100)))
    t4 = stability_bound(BoundParams(**dict(STABILITY_POINT, rounds=400)))
    assert t4 < 4.0 * t1


def test_stability_requires_schedule_and_positive_caps():
    with pytest.raises(ValueError, match="stepsize_scale"):
        stability_bound(BoundParams(**dict(STABILITY_POINT, stepsize_scale=None)))
    with pytest.raises(ValueError, match="loss_sup"):
        stability_bound(BoundParams(**dict(STABILITY_POINT, loss_sup=0.0)))


# -- stepsize-sum lemma ----------------------------------------------------------------


def brute_force_ratio(c, rate, t_max):
    worst = 0.0
    for t in range(2, t_max + 1):
        s = sum(c / (t - j) * rate**j for j in range(1, t))
        worst = max(worst, t * s / (c * c_lambda_lemma(rate)))
    return worst


def test_worst_ratio_matches_brute_force():
    for rate, c in ((0.3, 2.0), (0.7, 0.5)):
        fast = stepsize_sum_worst_ratio(c, rate, t_max=200)
        slow = brute_force_ratio(c, rate, 200)
        assert fast == pytest.approx(slow, rel=1e-10)


def test_worst_ratio_t2_value():
    # only t = 2 in range: ratio = 2 * rate / c_lambda_lemma(rate)
    assert stepsize_sum_worst_ratio(3.0, 0.5, t_max=2) == pytest.approx(
        2.0 * 0.5 / c_lambda_lemma(0.5), rel=1e-12
    )


def test_lemma_holds_on_grid():
    for rate in np.arange(0.1, 0.95, 0.1):
        for c in (0.5, 1.0, 2.0):
            ratio = stepsize_sum_worst_ratio(float(c), float(rate), t_max=2000)
            assert ratio <= 1.0 + 1e-9


def test_worst_ratio_independent_of_c():
    # c cancels between the sum and the cap
    a = stepsize_sum_worst_ratio(0.5, 0.4, t_max=500)
    b = stepsize_sum_worst_ratio(5.0, 0.4, t_max=500)
    assert a == pytest.approx(b, rel=1e-12)


def test_worst_ratio_validation():
    with pytest.raises(ValueError, match="c must be"):
        stepsize_sum_worst_ratio(0.0, 0.5)
    with pytest.raises(ValueError, match="rate"):
        stepsize_sum_worst_ratio(1.0, 1.0)
    with pytest.raises(ValueError, match="t_max"):
        stepsize_sum_worst_ratio(1.0, 0.5, t_max=1)
