from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stoplab import dist as D
from stoplab.bellman import Discount, critical_perturbation, solve_threshold
from stoplab.dist import DistSpec
from stoplab.policy import (
    PolicySpec,
    RegretReport,
    expected_inner_regret,
    expected_stop_time,
    oracle_value,
    perturbed_regret,
    plugin_draws,
    plugin_regret,
    plugin_regret_quadrature,
    plugin_report,
    policy_threshold,
    policy_value,
)
from stoplab.simlab import SimConfig, simulate_episodes

SWEEP = [1 - 1e-2, 1 - 1e-4, 1 - 1e-6]
GRID = [(a, th, g) for a in (0.5, 1.0, 2.0) for th in (0.0, 10.0) for g in (0.9, 0.99, 0.999)]
Z = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)


def consistent(rep: RegretReport) -> bool:
    return abs(rep.relative_regret - (1 - rep.v_policy / rep.v_star)) <= 1e-12 and rep.relative_regret <= 1 + 1e-12


def test_policy_spec():
    assert PolicySpec.oracle().label == "oracle"
    assert PolicySpec.perturbed(0.25).label == "perturbed(eps=0.25)"
    assert PolicySpec.plugin(3).label == "plugin(N=3)"
    assert PolicySpec.plugin(3).parameter == 3.0
    assert PolicySpec.perturbed(-1.5).parameter == -1.5
    with pytest.raises(ValueError):
        PolicySpec.plugin(0)
    with pytest.raises(ValueError):
        PolicySpec("greedy")
    with pytest.raises(ValueError):
        PolicySpec.perturbed(math.inf)


def test_policy_value_examples():
    d = DistSpec(2.0, 5.0)
    assert policy_value(d, Discount(0.9), 5.0 - 40.0) == pytest.approx(0.9 * 5.0, rel=1e-12)
    s = 0.3517337112491958
    assert policy_value(DistSpec(1.0), Discount(0.5), s) == pytest.approx(s, rel=1e-12)
    assert oracle_value(DistSpec(1.0), Discount(0.9)) == pytest.approx(1.2672378143074354, rel=1e-10)
    disc = Discount(0.99)
    assert oracle_value(d, disc) == pytest.approx(solve_threshold(d, disc).value, rel=1e-9)


@pytest.mark.parametrize("alpha, theta, gamma", GRID)
def test_oracle_dominates(alpha, theta, gamma):
    d, disc = DistSpec(alpha, theta), Discount(gamma)
    s = solve_threshold(d, disc).value
    v = oracle_value(d, disc)
    assert v == pytest.approx(s, rel=1e-10)
    for k in (0.5, 0.9, 1.1, 2.0):
        assert policy_value(d, disc, k * s) <= v * (1 + 1e-14)


def test_policy_value_vectorizes():
    d, disc = DistSpec(1.5, 1.0), Discount(0.95)
    s = np.array([-2.0, 0.0, 1.0, 3.0])
    np.testing.assert_allclose(policy_value(d, disc, s), [policy_value(d, disc, v) for v in s], rtol=1e-15)


def test_expected_stop_time_examples():
    assert expected_stop_time(DistSpec(2.0, 4.0), 4.0) == pytest.approx(2.0, rel=1e-12)
    assert expected_stop_time(DistSpec(1.0), 2.0) == pytest.approx(2 * math.exp(2), rel=1e-13)


def test_perturbed_examples():
    d = DistSpec(2.0)
    rep = perturbed_regret(d, Discount(0.999), 0.0)
    assert rep.relative_regret == 0.0 and rep.ci_halfwidth is None
    sd = math.sqrt(0.5)
    assert perturbed_regret(d, Discount(0.999), sd).relative_regret > perturbed_regret(d, Discount(0.999), -sd).relative_regret
    assert perturbed_regret(DistSpec(1.0), Discount(0.99), -0.5).relative_regret < 0.2


def test_underestimation_regret_matches_simulation():
    truth, disc = DistSpec(1.0, 0.0), Discount(0.99)
    rep = perturbed_regret(truth, disc, -0.5)
    stats = simulate_episodes(truth, PolicySpec.perturbed(-0.5), disc, SimConfig(master_seed=5, reps=100_000))
    assert abs(stats.mean_reward - rep.v_policy) <= 3 * stats.reward_se


@pytest.mark.parametrize("alpha, theta, gamma", GRID)
def test_regret_grid_properties(alpha, theta, gamma):
    d, disc = DistSpec(alpha, theta), Discount(gamma)
    sd = math.sqrt(D.variance(alpha))
    reps = [perturbed_regret(d, disc, z * sd) for z in Z]
    for rep in reps:
        assert rep.relative_regret >= 0
        assert consistent(rep)
    right = [r.relative_regret for z, r in zip(Z, reps) if z >= 0]
    assert right == sorted(right)


@pytest.mark.parametrize("alpha", [1.0, 2.0])
@pytest.mark.parametrize("gamma", [0.99, 0.999])
@pytest.mark.parametrize("z", [0.5, 1.0, 2.0])
def test_asymmetry(alpha, gamma, z):
    sd = math.sqrt(D.variance(alpha))
    for theta in (0.0, 10.0):
        d, disc = DistSpec(alpha, theta), Discount(gamma)
        assert perturbed_regret(d, disc, z * sd).relative_regret > perturbed_regret(d, disc, -z * sd).relative_regret


@settings(max_examples=40, deadline=None)
@given(
    alpha=st.sampled_from([0.5, 1.0, 1.5, 2.0]),
    theta=st.floats(0.0, 20.0),
    gamma=st.floats(0.5, 0.9999),
    eps=st.floats(-5.0, 5.0),
)
def test_regret_bounds_property(alpha, theta, gamma, eps):
    rep = perturbed_regret(DistSpec(alpha, theta), Discount(gamma), eps)
    assert -1e-12 <= rep.relative_regret <= 1 + 1e-12
    assert consistent(rep)


def test_stop_time_phase_transition():
    d = DistSpec(2.0)
    gaps = []
    for g in SWEEP:
        disc = Discount(g)
        eps_c = critical_perturbation(2.0, disc)
        hi = (1 - g) * expected_stop_time(d, policy_threshold(d, disc, 2 * eps_c))
        lo = (1 - g) * expected_stop_time(d, policy_threshold(d, disc, 0.5 * eps_c))
        assert hi > lo
        gaps.append(hi - lo)
    assert gaps == sorted(gaps)


def test_oracle_stops_well_inside_horizon():
    for alpha in (0.5, 1.0, 2.0):
        d = DistSpec(alpha)
        seq = []
        for g in SWEEP:
            disc = Discount(g)
            seq.append(D.tail(d, solve_threshold(d, disc).value) / (1 - g))
        assert seq == sorted(seq)


@pytest.mark.parametrize("alpha, eps", [(1.0, -0.25), (1.0, -1.0), (2.0, -1.0)])
def test_underestimation_regret_vanishes(alpha, eps):
    d = DistSpec(alpha)
    ratios, regrets = [], []
    for g in SWEEP:
        disc = Discount(g)
        ratios.append(D.tail(d, policy_threshold(d, disc, eps)) / (1 - g))
        regrets.append(perturbed_regret(d, disc, eps).relative_regret)
    assert ratios == sorted(ratios)
    assert regrets == sorted(regrets, reverse=True)


@pytest.mark.parametrize("alpha, eps", [(2.0, 1.0), (2.0, 0.5), (1.5, 2.0), (3.0, 0.5)])
def test_overestimation_regret_approaches_one(alpha, eps):
    d = DistSpec(alpha)
    ratios, regrets = [], []
    for g in SWEEP:
        disc = Discount(g)
        ratios.append(D.tail(d, policy_threshold(d, disc, eps)) / (1 - g))
        regrets.append(perturbed_regret(d, disc, eps).relative_regret)
    assert ratios == sorted(ratios, reverse=True)
    assert regrets == sorted(regrets)


# -- plug-in ------------------------------------------------------------------------


def test_plugin_formula_structure():
    truth, disc = DistSpec(2.0, 10.0), Discount(0.99)
    est, thr, inner = plugin_draws(truth, disc, 3, 1, seed=4)
    rep = plugin_regret(truth, disc, 3, 1, seed=4)
    assert rep.relative_regret == pytest.approx(1 - 0.99**3 * (1 - inner[0]), rel=1e-15)
    assert rep.ci_halfwidth is None
    assert thr[0] == pytest.approx(solve_threshold(DistSpec(2.0, est[0]), disc).value, rel=1e-12)
    assert inner[0] == pytest.approx(perturbed_regret(truth, disc, est[0] - 10.0).relative_regret, abs=1e-13)


def test_plugin_reports_are_consistent():
    truth, disc = DistSpec(1.0, 10.0), Discount(0.999)
    rep = plugin_regret(truth, disc, 2, 500, seed=1)
    assert consistent(rep)
    assert rep.ci_halfwidth > 0
    rep2 = plugin_report(truth, disc, 2, np.zeros(10))
    assert rep2.relative_regret == pytest.approx(1 - 0.999**2, rel=1e-12)


def test_plugin_independent_of_blocks_and_threads():
    truth, disc = DistSpec(1.5, 10.0), Discount(0.999)
    a = plugin_draws(truth, disc, 5, 300, seed=8)
    b = plugin_draws(truth, disc, 5, 300, seed=8, block=64, parallelism=4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    # a prefix of the replications is reproduced by a shorter run
    c = plugin_draws(truth, disc, 5, 100, seed=8)
    np.testing.assert_array_equal(c[2], a[2][:100])


def test_plugin_validation():
    truth, disc = DistSpec(2.0), Discount(0.9)
    with pytest.raises(ValueError):
        plugin_regret(truth, disc, 0, 10)
    with pytest.raises(ValueError):
        plugin_regret(truth, disc, 1, 0)


def test_quadrature_integrand_vanishes_at_location():
    truth, disc = DistSpec(0.5, 10.0), Discount(0.99)
    assert perturbed_regret(truth, disc, 0.0).relative_regret == 0.0
    inner, err = expected_inner_regret(truth, disc)
    assert 0 < inner < 1 and err < 1e-6


@pytest.mark.parametrize("alpha, gamma", [(0.5, 0.99), (1.0, 0.999), (2.0, 0.99)])
def test_quadrature_matches_monte_carlo(alpha, gamma):
    truth, disc = DistSpec(alpha, 10.0), Discount(gamma)
    exact = plugin_regret_quadrature(truth, disc)
    mc = plugin_regret(truth, disc, 1, 40_000, seed=17)
    assert exact.ci_halfwidth is None and consistent(exact)
    assert abs(exact.relative_regret - mc.relative_regret) <= mc.ci_halfwidth


def test_single_sample_trend_at_half():
    truth = DistSpec(0.5, 10.0)
    first = plugin_regret_quadrature(truth, Discount(0.9)).relative_regret
    last = plugin_regret_quadrature(truth, Discount(0.9999)).relative_regret
    assert last < first
