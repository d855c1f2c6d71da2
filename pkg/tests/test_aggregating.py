"""Exponential-weights mixing, substitution, and the regret guarantee."""

import math

import numpy as np
import pytest

from jeffreys import (ExpertPool, MixabilityViolation, PoolCollapseError,
                      aa_observe, aa_regret_slack, aa_step,
                      bounded_square_loss_game, generalized_prediction,
                      log_loss_game, substitute, uniform_pool)
from jeffreys.aggregating import _substitute_numeric, log_sum_exp


def test_pool_validation():
    with pytest.raises(ValueError):
        ExpertPool(np.array([0.5, -0.1]))
    with pytest.raises(ValueError):
        ExpertPool(np.array([0.9, 0.9]))
    pool = ExpertPool(np.array([0.25, 0.25]))  # deficient priors are fine
    assert len(pool) == 2


def test_normalized_weights_sum_to_one():
    pool = uniform_pool(7)
    aa_observe(pool, np.arange(7, dtype=float), eta=1.0)
    w = pool.normalized_weights()
    assert abs(float(w.sum()) - 1.0) < 1e-12


def test_log_sum_exp_handles_all_neginf():
    assert log_sum_exp(np.array([-math.inf, -math.inf])) == -math.inf


# ---------------------------------------------------------------------------
# generalized prediction


def test_identical_experts_leave_point_unchanged():
    game = log_loss_game(m=2)
    lam = game.canonical_point(np.array([0.3, 0.7]))
    g = generalized_prediction(uniform_pool(4), np.tile(lam, (4, 1)), eta=1.0)
    assert np.allclose(g, lam, atol=1e-12)


def test_degenerate_weights_pick_single_expert():
    game = log_loss_game(m=2)
    lam1 = game.canonical_point(np.array([0.3, 0.7]))
    lam2 = game.canonical_point(np.array([0.9, 0.1]))
    pool = uniform_pool(2)
    pool.log_weights = np.array([0.0, -math.inf])
    g = generalized_prediction(pool, np.stack([lam1, lam2]), eta=1.0)
    assert np.allclose(g, lam1, atol=1e-12)


def test_bayes_mixture_value():
    game = log_loss_game(m=2)
    pts = np.stack([game.canonical_point(np.array([0.2, 0.8])),
                    game.canonical_point(np.array([0.8, 0.2]))])
    g = generalized_prediction(uniform_pool(2), pts, eta=1.0)
    assert np.allclose(g, [-math.log(0.5), -math.log(0.5)], atol=1e-12)


def test_collapsed_pool_raises():
    pool = uniform_pool(2)
    pool.log_weights = np.array([-math.inf, -math.inf])
    with pytest.raises(PoolCollapseError):
        generalized_prediction(pool, np.zeros((2, 2)), eta=1.0)


# ---------------------------------------------------------------------------
# substitution


def test_substitute_recovers_canonical_point():
    game = bounded_square_loss_game()
    g = game.canonical_point(0.37)
    gamma = substitute(game, g)
    assert gamma == pytest.approx(0.37, abs=1e-9)


def test_substitute_bayes_rule():
    game = log_loss_game(m=2)
    pts = np.stack([game.canonical_point(np.array([0.2, 0.8])),
                    game.canonical_point(np.array([0.8, 0.2]))])
    g = generalized_prediction(uniform_pool(2), pts, eta=1.0)
    gamma = substitute(game, g)
    assert np.allclose(gamma, [0.5, 0.5], atol=1e-12)


def test_substitute_domination_bounded_square():
    game = bounded_square_loss_game()
    pts = np.stack([game.canonical_point(0.3), game.canonical_point(0.7)])
    g = generalized_prediction(uniform_pool(2), pts, eta=2.0)
    gamma = substitute(game, g)
    for idx, omega in ((0, 0.0), (-1, 1.0)):
        assert (omega - gamma) ** 2 <= g[idx] + 1e-9


def test_substitute_domination_on_continuum():
    # the endpoint formula must dominate at every outcome, not just 0 and 1
    game = bounded_square_loss_game()
    rng = np.random.default_rng(5)
    omegas = np.linspace(0.0, 1.0, 501)
    for _ in range(25):
        k = rng.integers(2, 30)
        pool = ExpertPool(rng.dirichlet(np.ones(k)))
        gammas = rng.random(k)
        pts = np.stack([game.canonical_point(x) for x in gammas])
        g_ends = generalized_prediction(pool, pts, eta=2.0)
        gamma = substitute(game, g_ends)
        mix = np.log(np.dot(pool.normalized_weights(),
                            np.exp(-2.0 * (omegas[None, :] - gammas[:, None]) ** 2)))
        g_all = -mix / 2.0
        assert np.max((omegas - gamma) ** 2 - g_all) <= 1e-9


def test_generic_search_agrees_with_closed_form():
    game = bounded_square_loss_game()
    pts = np.stack([game.canonical_point(0.2), game.canonical_point(0.9)])
    g_full = generalized_prediction(uniform_pool(2), pts, eta=2.0)
    assert _substitute_numeric(game, g_full, 1e-9) == pytest.approx(
        substitute(game, g_full), abs=1e-6)


def test_substitute_flags_excessive_eta():
    game = log_loss_game(m=2)
    pts = np.stack([game.canonical_point(np.array([0.05, 0.95])),
                    game.canonical_point(np.array([0.95, 0.05]))])
    g = generalized_prediction(uniform_pool(2), pts, eta=4.0)
    with pytest.raises(MixabilityViolation):
        substitute(game, g)


# ---------------------------------------------------------------------------
# the step/observe cycle


def test_aa_step_single_expert():
    game = log_loss_game(m=2)
    gamma = aa_step(uniform_pool(1), [np.array([0.3, 0.7])], game, eta=1.0)
    assert np.allclose(gamma, [0.3, 0.7], atol=1e-12)


def test_aa_step_identical_experts():
    game = bounded_square_loss_game()
    gamma = aa_step(uniform_pool(3), [0.42, 0.42, 0.42], game, eta=2.0)
    assert gamma == pytest.approx(0.42, abs=1e-12)


def test_aa_observe_updates():
    pool = uniform_pool(2)
    before = pool.log_weights.copy()
    aa_observe(pool, np.zeros(2), eta=1.0)
    assert np.array_equal(pool.log_weights, before)

    aa_observe(pool, np.array([0.0, math.inf]), eta=1.0)
    assert pool.log_weights[1] == -math.inf

    pool = uniform_pool(2)
    aa_observe(pool, np.array([0.0, math.log(2.0)]), eta=1.0)
    w = pool.normalized_weights()
    assert w[0] / w[1] == pytest.approx(2.0, abs=1e-12)


def test_regret_slack_single_expert_is_zero():
    game = log_loss_game(m=2)
    pool = ExpertPool(np.array([1.0]))
    rng = np.random.default_rng(2)
    expert = np.array([0.3, 0.7])
    sceptic_cum, expert_cum = [], []
    cs = ce = 0.0
    for _ in range(200):
        gamma = aa_step(pool, [expert], game, eta=1.0)
        omega = int(rng.random() < 0.7)
        cs += game.loss(omega, gamma)
        ce += game.loss(omega, expert)
        aa_observe(pool, np.array([game.loss(omega, expert)]), eta=1.0)
        sceptic_cum.append(cs)
        expert_cum.append(ce)
    slack = aa_regret_slack(sceptic_cum, [expert_cum], pool.priors, C=1.0)
    assert np.max(np.abs(slack)) < 1e-9


def test_regret_slack_property_simulated():
    game = log_loss_game(m=2)
    experts = [np.array([0.8, 0.2]), np.array([0.5, 0.5]), np.array([0.1, 0.9])]
    for seed in range(5):
        rng = np.random.default_rng(seed)
        pool = uniform_pool(3)
        cs = 0.0
        cums = np.zeros(3)
        sceptic_cum, expert_cums = [], []
        for _ in range(300):
            gamma = aa_step(pool, experts, game, eta=1.0)
            omega = int(rng.random() < 0.4)
            losses = np.array([game.loss(omega, e) for e in experts])
            cs += game.loss(omega, gamma)
            cums = cums + losses
            aa_observe(pool, losses, eta=1.0)
            sceptic_cum.append(cs)
            expert_cums.append(cums.copy())
        slack = aa_regret_slack(sceptic_cum, np.array(expert_cums).T,
                                pool.priors, C=1.0)
        assert float(np.min(slack)) >= -1e-9


def test_exhaustive_bayes_tree_oracle():
    """Stepwise aggregation must reproduce the marginal likelihood exactly.

    The oracle computes, for every outcome sequence, the mixture probability
    by direct products and sums; the aggregated log-loss must match its
    negative log to 1e-9.
    """
    game = log_loss_game(m=2)
    experts = [np.array([0.3, 0.7]), np.array([0.6, 0.4]), np.array([0.9, 0.1])]
    priors = np.array([0.5, 0.25, 0.25])
    n_steps = 8
    for code in range(2 ** n_steps):
        seq = [(code >> i) & 1 for i in range(n_steps)]
        pool = ExpertPool(priors)
        cum = 0.0
        for omega in seq:
            gamma = aa_step(pool, experts, game, eta=1.0)
            cum += game.loss(omega, gamma)
            aa_observe(pool, np.array([game.loss(omega, e) for e in experts]),
                       eta=1.0)
        likelihood = sum(p * np.prod([e[w] for w in seq])
                         for p, e in zip(priors, experts))
        assert abs(cum - (-math.log(likelihood))) < 1e-9
