"""Exponential-weights aggregation over an expert pool for mixable games.

The mixing step turns the weighted pool of expert loss profiles into a
generalized prediction ``g``; the substitution step finds an actual
prediction whose loss is dominated by ``g`` everywhere, which exists
whenever the game is perfectly mixable at the pool's learning rate.  The
resulting cumulative loss trails every expert by at most
``C * ln(1 / p_k)`` with ``C = 1 / eta``.

Substitution is a generic numeric minimax search over the prediction grid;
log-loss pools (a probability mixture) and bounded square-loss pools (an
endpoint formula) take exact closed-form fast paths that the generic
search is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MixabilityViolation, PoolCollapseError
from .games import Game, GameKind, Prediction

DOMINATION_TOL = 1e-9


def log_sum_exp(x: np.ndarray, axis=None) -> np.ndarray:
    """Overflow-safe log of a sum of exponentials; handles all--inf slices."""
    m = np.max(x, axis=axis, keepdims=axis is not None)
    safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = safe + np.log(np.sum(np.exp(x - safe), axis=axis, keepdims=axis is not None))
    if axis is None:
        return float(out)
    return np.squeeze(out, axis=axis)


def _lse1(x: np.ndarray) -> float:
    # lean 1-D variant for hot loops; exp underflow to 0 is the intended
    # treatment of eliminated experts
    m = x.max()
    if m == -math.inf:
        return -math.inf
    return float(m) + math.log(float(np.exp(x - m).sum()))


@dataclass(frozen=True)
class MixabilityParams:
    """Learning rate and regret constant for one game."""

    eta: float
    C: float


# (eta, C) pairs validated empirically by the regret-slack property tests.
DEFAULT_PARAMS = {
    GameKind.LOG_LOSS: MixabilityParams(eta=1.0, C=1.0),
    GameKind.BOUNDED_SQUARE: MixabilityParams(eta=2.0, C=0.5),
}


def params_for(game: Game) -> MixabilityParams:
    try:
        return DEFAULT_PARAMS[game.kind]
    except KeyError:
        raise MixabilityViolation(
            f"no mixability parameters for the {game.kind.value} game") from None


@dataclass
class ExpertPool:
    """Weights and priors for a (possibly truncated) countable expert pool.

    Priors must be strictly positive and sum to at most 1; a deficient sum
    simply loosens the per-expert bound.  ``log_weights`` start at
    ``ln(p_k)`` and decay with eta times each expert's loss;
    normalization happens at read time.
    """

    priors: np.ndarray
    log_weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=float)
        if np.any(self.priors <= 0.0):
            raise ValueError("priors must be strictly positive")
        if float(self.priors.sum()) > 1.0 + 1e-12:
            raise ValueError("priors must sum to at most 1")
        self.log_weights = np.log(self.priors)

    def __len__(self) -> int:
        return len(self.priors)

    def normalized_weights(self) -> np.ndarray:
        if np.all(np.isneginf(self.log_weights)):
            raise PoolCollapseError("every expert has suffered infinite loss")
        shifted = self.log_weights - np.max(self.log_weights)
        w = np.exp(shifted)
        return w / w.sum()


def uniform_pool(k: int) -> ExpertPool:
    return ExpertPool(np.full(k, 1.0 / k))


def generalized_prediction(pool: ExpertPool, expert_points: np.ndarray,
                           eta: float) -> np.ndarray:
    """Per-outcome mixture loss ``g(omega) = -ln(sum_k w_k e^(-eta loss_k)) / eta``.

    ``expert_points`` has shape (K, O): expert canonical points over the
    outcomes of interest.  Infinite expert losses drop out of the mixture.
    """
    points = np.asarray(expert_points, dtype=float)
    if np.all(np.isneginf(pool.log_weights)):
        raise PoolCollapseError("every expert has suffered infinite loss")
    log_w = pool.log_weights - log_sum_exp(pool.log_weights)
    with np.errstate(invalid="ignore"):
        exponents = log_w[:, None] - eta * points
    exponents = np.where(np.isnan(exponents), -np.inf, exponents)
    return -log_sum_exp(exponents, axis=0) / eta


def _substitute_log_loss(game: Game, g: np.ndarray) -> np.ndarray:
    # exp(-g) is the weighted probability mixture; its mass never exceeds 1
    # for eta <= 1, so renormalizing only pushes the prediction upward.
    raw = np.exp(-np.asarray(g, dtype=float))
    total = float(raw.sum())
    if total <= 0.0:
        raise MixabilityViolation("generalized prediction is infinite everywhere")
    return raw / total


def _substitute_bounded_square(g0: float, g1: float) -> float:
    # Equalizes the endpoint violations; dominates on all of [0, 1] because
    # (omega - gamma)^2 - g(omega) is convex for eta <= 2 mixtures.
    return min(1.0, max(0.0, 0.5 * (1.0 + g0 - g1)))


def substitute(game: Game, g: np.ndarray, tol: float = DOMINATION_TOL) -> Prediction:
    """A prediction whose loss is dominated by ``g`` on the outcome grid.

    Closed forms cover log-loss and bounded square-loss; other games fall
    back to minimax search over the prediction grid.  Raises
    MixabilityViolation when the best achievable excess exceeds ``tol``
    (learning rate too large, or the game is not mixable).
    """
    from .games import _ext_diff

    g = np.asarray(g, dtype=float)
    if game.kind is GameKind.LOG_LOSS:
        gamma = _substitute_log_loss(game, g)
        worst = float(np.max(_ext_diff(game.canonical_point(gamma), g)))
        if worst > tol:
            raise MixabilityViolation(f"substitution excess {worst:.3g} exceeds {tol:.3g}")
        return gamma
    if game.kind is GameKind.BOUNDED_SQUARE and len(g) >= 2:
        gamma = _substitute_bounded_square(float(g[0]), float(g[-1]))
        lo, hi = game.outcome_grid[0], game.outcome_grid[-1]
        worst = max((lo - gamma) ** 2 - float(g[0]), (hi - gamma) ** 2 - float(g[-1]))
        if worst <= tol:
            return gamma
        # fall through to the generic search before giving up
    return _substitute_numeric(game, g, tol)


def _substitute_numeric(game: Game, g: np.ndarray, tol: float) -> Prediction:
    from .games import _ext_diff, _min_gap  # shared refinement machinery

    def gap(params):
        L = game.losses_for_params(np.atleast_1d(params))
        return np.max(_ext_diff(L, g[None, :]), axis=1)

    u, worst = _min_gap(game, gap, tol)
    if worst > tol:
        raise MixabilityViolation(f"substitution excess {worst:.3g} exceeds {tol:.3g}")
    return game.prediction_from_param(u)


def aa_step(pool: ExpertPool, expert_predictions: Sequence[Prediction],
            game: Game, eta: float, tol: float = DOMINATION_TOL) -> Prediction:
    """One prediction of the aggregating strategy; weights are not touched."""
    points = np.stack([game.canonical_point(p) for p in expert_predictions])
    g = generalized_prediction(pool, points, eta)
    return substitute(game, g, tol)


def aa_observe(pool: ExpertPool, expert_losses: np.ndarray, eta: float) -> ExpertPool:
    """Decay the pool's weights by the observed expert losses (in place).

    Weights are stored up to a common additive constant in log space:
    anchoring the maximum at zero costs nothing observable (normalization
    removes constants) and keeps the precision of the weights that matter
    from degrading as cumulative losses grow.
    """
    losses = np.asarray(expert_losses, dtype=float)
    with np.errstate(invalid="ignore"):
        decayed = pool.log_weights - eta * losses
    # a -inf weight stays eliminated even against an infinite new loss
    decayed = np.where(np.isnan(decayed), -np.inf, decayed)
    top = decayed.max()
    if top < -512.0 and math.isfinite(top):
        decayed -= top
    pool.log_weights = decayed
    return pool


def aa_regret_slack(sceptic_cum: np.ndarray, expert_cums: np.ndarray,
                    priors: np.ndarray, C: float) -> np.ndarray:
    """Per-expert slack ``L_k(n) + C ln(1/p_k) - L_sceptic(n)``, shape (K, N).

    Nonnegative (up to tolerance) everywhere for a correct aggregating run.
    """
    sceptic_cum = np.asarray(sceptic_cum, dtype=float)
    expert_cums = np.asarray(expert_cums, dtype=float)
    penalty = C * np.log(1.0 / np.asarray(priors, dtype=float))
    return expert_cums + penalty[:, None] - sceptic_cum[None, :]
