"""Game definitions, canonical points, and geometric predicates."""

import math

import numpy as np
import pytest

from jeffreys import (DomainError, absolute_loss_game,
                      bounded_absolute_loss_game, bounded_square_loss_game,
                      check_non_redundant, check_perfectly_mixable,
                      game_from_descriptor, is_subprediction,
                      is_superprediction, log_loss_game, points_non_redundant,
                      quartic_loss_game, square_loss_game)


def binary_bsq():
    return bounded_square_loss_game(outcome_grid=[0.0, 1.0])


# ---------------------------------------------------------------------------
# losses


def test_square_loss_value():
    assert square_loss_game().loss(0.0, 1.0) == 1.0


def test_absolute_loss_value():
    assert absolute_loss_game().loss(0.3, 0.8) == pytest.approx(0.5)


def test_log_loss_value():
    g = log_loss_game(m=2)
    assert g.loss(1, np.array([0.75, 0.25])) == pytest.approx(-math.log(0.25))


def test_log_loss_zero_probability_is_infinite():
    g = log_loss_game(m=2)
    assert g.loss(1, np.array([1.0, 0.0])) == math.inf


def test_infinite_loss_poisons_cumulative_sums():
    g = log_loss_game(m=2)
    total = g.loss(1, np.array([1.0, 0.0])) + g.loss(0, np.array([0.5, 0.5]))
    assert total == math.inf


def test_domain_violations_rejected():
    with pytest.raises(DomainError):
        bounded_square_loss_game().loss(1.5, 0.5)
    with pytest.raises(DomainError):
        bounded_square_loss_game().loss(0.5, -0.1)
    with pytest.raises(DomainError):
        log_loss_game(m=2).loss(2, np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        log_loss_game(m=2).loss(0, np.array([0.7, 0.7]))


# ---------------------------------------------------------------------------
# canonical points


def test_canonical_point_bounded_square_symmetry():
    g = binary_bsq()
    assert np.allclose(g.canonical_point(0.5), [0.25, 0.25])
    assert np.allclose(g.canonical_point(0.0), [0.0, 1.0])


def test_canonical_point_quartic():
    g = quartic_loss_game()
    g = type(g)(g.kind, np.array([-1.0, 0.0, 1.0]), g.prediction_grid)
    assert np.allclose(g.canonical_point(1.0), [16.0, 1.0, 0.0])


def test_log_loss_canonical_points_recover_probabilities():
    g = log_loss_game(m=2)
    for p in np.linspace(0.05, 0.95, 7):
        lam = g.canonical_point(np.array([1 - p, p]))
        assert abs(float(np.sum(np.exp(-lam))) - 1.0) < 1e-9


# ---------------------------------------------------------------------------
# membership predicates


def test_superprediction_examples():
    g = binary_bsq()
    assert is_superprediction(g, [1.0, 1.0])
    assert not is_superprediction(g, [0.0, 0.0])
    assert is_superprediction(g, [0.25, 0.25])


def test_subprediction_examples():
    g = binary_bsq()
    assert is_subprediction(g, [0.0, 0.0])
    assert is_subprediction(g, [0.25, 0.25])
    # brute-force oracle: (1,1) would need some gamma with gamma^2 >= 1 and
    # (1-gamma)^2 >= 1 simultaneously; the sweep shows the max-min is negative
    sweep = np.linspace(0.0, 1.0, 10001)
    best = np.max(np.minimum(sweep ** 2 - 1.0, (1.0 - sweep) ** 2 - 1.0))
    assert best < 0
    assert not is_subprediction(g, [1.0, 1.0])


def test_canonical_points_lie_in_both_sets():
    for game in (binary_bsq(), log_loss_game(m=2), bounded_absolute_loss_game()):
        params = game.prediction_grid[[3, 60, 128, 200, 253]]
        for u in params:
            point = game.canonical_point(game.prediction_from_param(u))
            assert is_superprediction(game, point)
            assert is_subprediction(game, point)


def test_superprediction_monotone_in_domination():
    g = binary_bsq()
    rng = np.random.default_rng(0)
    for _ in range(20):
        p = rng.random(2)
        if is_superprediction(g, p):
            q = p + rng.random(2) * 0.5
            assert is_superprediction(g, q)


def test_membership_rejects_bad_inputs():
    g = binary_bsq()
    with pytest.raises(ValueError):
        is_superprediction(g, [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        is_superprediction(g, [1.0, 1.0], tol=0.0)


# ---------------------------------------------------------------------------
# non-redundancy


def test_bounded_square_non_redundant():
    assert check_non_redundant(bounded_square_loss_game(grid_size=101,
                                                        outcome_grid=[0.0, 1.0]))


def test_synthetic_ordered_pair_is_redundant():
    assert not points_non_redundant(np.array([[1.0, 1.0], [2.0, 2.0]]))


def test_log_loss_non_redundant():
    assert check_non_redundant(log_loss_game(m=2, grid_size=101))


# ---------------------------------------------------------------------------
# perfect mixability


def test_log_loss_mixable_at_eta_one():
    assert check_perfectly_mixable(log_loss_game(m=2), 1.0)


def test_log_loss_not_mixable_at_eta_three_halves():
    assert not check_perfectly_mixable(log_loss_game(m=2), 1.5, tol=1e-6)


def test_bounded_square_mixable_at_eta_two():
    assert check_perfectly_mixable(bounded_square_loss_game(), 2.0)


def test_bounded_absolute_not_mixable():
    assert not check_perfectly_mixable(bounded_absolute_loss_game(), 1.0)


def test_mixability_rejects_bad_eta():
    with pytest.raises(ValueError):
        check_perfectly_mixable(log_loss_game(m=2), 0.0)


# ---------------------------------------------------------------------------
# descriptors


def test_descriptor_round_trip():
    for game in (square_loss_game(), bounded_square_loss_game(),
                 quartic_loss_game(), log_loss_game(m=3)):
        desc = game.descriptor()
        rebuilt = game_from_descriptor(desc)
        assert rebuilt.kind == game.kind
        assert rebuilt.m == game.m


def test_grids_must_increase():
    with pytest.raises(ValueError):
        bounded_square_loss_game(outcome_grid=[1.0, 0.0])
