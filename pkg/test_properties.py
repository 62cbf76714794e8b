"""Randomized invariants across calibrate, transport and verify."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from calibrate import (
    PrivacyBudget,
    calibrate_generic,
    calibrate_sab,
    calibrate_saperp,
    calibrate_spperp_bernoulli,
    calibrate_spperp_max,
    calibrate_spperp_mgf,
    calibrate_spq,
    calibrate_spq_bernoulli,
    calibrate_spq_bernoulli_relaxed,
    relax_context,
)
from dist import DiscreteDistribution, DistAbsent, DistPair, ValueAbsent, ValuePair
from strategies import config_and_user, distributions, epsilons, multi_atom_distributions, support_values
from verify import verify_pair

SOUNDNESS = settings(max_examples=500, deadline=None)


def assert_sound(config, pair, result, eps):
    report = verify_pair(config, pair, result.theta, eps)
    assert report.max_abs_log_ratio <= eps.epsilon + 1e-9, (pair.describe(), result.method, report)
    assert report.satisfied


# =========================
# Soundness of every calibrator
# =========================
@SOUNDNESS
@given(config_and_user(), support_values, support_values, epsilons)
def test_value_pairs_are_sound(cu, a, b, eps):
    config, user = cu
    budget = PrivacyBudget(eps)
    pair = ValuePair(user, float(a), float(b))
    assert_sound(config, pair, calibrate_sab([pair], budget), budget)
    assert_sound(config, pair, calibrate_generic(config, [pair], budget), budget)


@SOUNDNESS
@given(config_and_user(), support_values, epsilons)
def test_value_absent_pairs_are_sound(cu, a, eps):
    config, user = cu
    budget = PrivacyBudget(eps)
    pair = ValueAbsent(user, float(a))
    assert_sound(config, pair, calibrate_saperp([pair], budget), budget)
    assert_sound(config, pair, calibrate_generic(config, [pair], budget), budget)


@SOUNDNESS
@given(config_and_user(), distributions(), epsilons)
def test_distribution_absent_pairs_are_sound(cu, P, eps):
    config, user = cu
    budget = PrivacyBudget(eps)
    pair = DistAbsent(user, P)
    assert_sound(config, pair, calibrate_spperp_max([P], budget), budget)
    assert_sound(config, pair, calibrate_spperp_mgf([P], budget), budget)
    assert_sound(config, pair, calibrate_generic(config, [pair], budget), budget)


@SOUNDNESS
@given(config_and_user(), st.integers(1, 20), epsilons)
def test_bernoulli_absent_pairs_are_sound(cu, k, eps):
    config, user = cu
    budget = PrivacyBudget(eps)
    p = k / 20
    pair = DistAbsent(user, DiscreteDistribution.bernoulli(p))
    assert_sound(config, pair, calibrate_spperp_bernoulli(p, budget), budget)


@SOUNDNESS
@given(config_and_user(), st.integers(0, 20), st.integers(0, 20), epsilons)
def test_bernoulli_pairs_are_sound(cu, kp, kq, eps):
    config, user = cu
    assume(kp != kq)
    budget = PrivacyBudget(eps)
    p, q = kp / 20, kq / 20
    pair = DistPair(user, DiscreteDistribution.bernoulli(p), DiscreteDistribution.bernoulli(q))
    assert_sound(config, pair, calibrate_spq_bernoulli(budget), budget)
    assert_sound(config, pair, calibrate_spq_bernoulli_relaxed(relax_context(config, user, p, q), budget), budget)


@SOUNDNESS
@given(config_and_user(), distributions(), distributions(), epsilons)
def test_distribution_pairs_are_sound(cu, P, Q, eps):
    config, user = cu
    budget = PrivacyBudget(eps)
    pair = DistPair(user, P, Q)
    assert_sound(config, pair, calibrate_spq([pair], budget), budget)
    assert_sound(config, pair, calibrate_generic(config, [pair], budget), budget)


# =========================
# Consistency with the system-level calibrator
# =========================
@given(config_and_user(), support_values, support_values, epsilons)
def test_generic_matches_value_closed_forms(cu, a, b, eps):
    config, user = cu
    budget = PrivacyBudget(eps)
    value = ValuePair(user, float(a), float(b))
    absent = ValueAbsent(user, float(a))
    assert calibrate_generic(config, [value], budget).theta == calibrate_sab([value], budget).theta
    assert calibrate_generic(config, [absent], budget).theta == calibrate_saperp([absent], budget).theta


@given(config_and_user(), distributions(), distributions(), epsilons)
def test_generic_never_exceeds_user_level(cu, P, Q, eps):
    config, user = cu
    budget = PrivacyBudget(eps)
    pair = DistPair(user, P, Q)
    generic = calibrate_generic(config, [pair], budget)
    assert generic.theta <= calibrate_spq([pair], budget).theta
    assert generic.theta == calibrate_generic(config, [pair], budget, use_plan=True).theta
    absent = calibrate_generic(config, [DistAbsent(user, P)], budget)
    assert absent.theta <= calibrate_spperp_max([P], budget).theta


# =========================
# Orderings & closed forms
# =========================
@settings(max_examples=500)
@given(multi_atom_distributions(), epsilons)
def test_mgf_is_strictly_below_max(P, eps):
    budget = PrivacyBudget(eps)
    assert calibrate_spperp_mgf([P], budget).theta < calibrate_spperp_max([P], budget).theta


@given(distributions(), epsilons)
def test_mgf_never_exceeds_max(P, eps):
    budget = PrivacyBudget(eps)
    assert calibrate_spperp_mgf([P], budget).theta <= calibrate_spperp_max([P], budget).theta


@given(st.integers(1, 20), st.floats(min_value=0.05, max_value=3.0))
def test_mgf_root_condition(k, eps):
    P = DiscreteDistribution.bernoulli(k / 20)
    theta = calibrate_spperp_mgf([P], PrivacyBudget(eps)).theta
    assume(theta > 0)
    mgf = float(np.dot(P.mass, np.exp(np.abs(P.support) / theta)))
    assert abs(mgf - math.exp(eps)) <= 1e-8 * math.exp(eps)


@settings(max_examples=500)
@given(st.integers(1, 20), epsilons)
def test_bernoulli_closed_form_matches_mgf(k, eps):
    p = k / 20
    budget = PrivacyBudget(eps)
    closed = calibrate_spperp_bernoulli(p, budget).theta
    root = calibrate_spperp_mgf([DiscreteDistribution.bernoulli(p)], budget).theta
    assert abs(closed - root) <= 1e-9


@given(config_and_user(), distributions(), distributions(), st.lists(epsilons, min_size=2, max_size=6))
def test_theta_nonincreasing_in_epsilon(cu, P, Q, eps_values):
    config, user = cu
    grid = sorted(set(eps_values))
    calibrators = [
        lambda e: calibrate_spperp_max([P], e),
        lambda e: calibrate_spperp_mgf([P], e),
        lambda e: calibrate_spq([DistPair(user, P, Q)], e),
        lambda e: calibrate_generic(config, [DistPair(user, P, Q)], e),
    ]
    for calibrate in calibrators:
        thetas = [calibrate(PrivacyBudget(e)).theta for e in grid]
        # the root finder resolves θ to 1e-10, so nearly equal budgets may tie
        assert all(x >= y - 1e-9 for x, y in zip(thetas, thetas[1:]))


# =========================
# Presence probabilities are irrelevant
# =========================
@given(config_and_user(), distributions(), distributions(), epsilons, st.floats(0.0, 1.0))
def test_presence_leaves_every_theta_unchanged(cu, P, Q, eps, presence):
    config, user = cu
    budget = PrivacyBudget(eps)
    pairs = [ValuePair(user, 3.0, -2.0), ValueAbsent(user, 4.0), DistAbsent(user, P), DistPair(user, P, Q)]
    perturbed = config
    for uid in config.user_ids:
        perturbed = perturbed.with_presence(uid, presence)
    for pair in pairs:
        before = calibrate_generic(config, [pair], budget).theta
        after = calibrate_generic(perturbed, [pair], budget).theta
        assert before == after


# =========================
# Verifier monotonicity
# =========================
@given(config_and_user(), support_values, support_values)
def test_value_pair_ratio_decreases_with_theta(cu, a, b):
    config, user = cu
    assume(a != b)
    pair = ValuePair(user, float(a), float(b))
    ratios = [verify_pair(config, pair, theta, PrivacyBudget(1.0)).max_abs_log_ratio for theta in (0.5, 1, 2, 4, 8)]
    assert all(x >= y - 1e-12 for x, y in zip(ratios, ratios[1:]))
    assert ratios[0] == pytest.approx(abs(a - b) / 0.5, abs=1e-9)


@given(config_and_user(), distributions(), distributions())
def test_distribution_pair_ratio_decreases_with_theta(cu, P, Q):
    config, user = cu
    thetas = (0.25, 0.5, 1, 2, 4, 8, 16)
    for pair in (DistPair(user, P, Q), DistAbsent(user, P)):
        ratios = [verify_pair(config, pair, theta, PrivacyBudget(1.0)).max_abs_log_ratio for theta in thetas]
        assert all(x >= y - 1e-9 for x, y in zip(ratios, ratios[1:])), (pair.describe(), ratios)
