"""Lower and upper alpha-divergences between predictions.

The divergence between two predictions is measured geometrically: form the
alpha-weighted mean of their canonical points, then find the largest
vertical shift that keeps the mean a superprediction (lower divergence)
or the smallest shift that makes it a subprediction (upper divergence).
The shift, scaled by ``4 / (1 - alpha^2)``, is the divergence value; both
quantities are reported since the raw shift is what the vertical-distance
picture reads off directly.

Closed forms are provided for the square-loss family (the divergence is
``(gamma1 - gamma2)^2`` for every alpha) and for log-loss games (a
log-affinity formula), together with the standard alpha-divergence and the
Kullback-Leibler limit for log-loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .games import Game, GameKind, is_subprediction, is_superprediction

_BRACKET_DOUBLINGS = 4


@dataclass(frozen=True)
class DivergenceResult:
    """Outcome of a divergence computation.

    ``value`` is the scaled divergence ``4 / (1 - alpha^2) * shift``;
    ``shift`` is the raw vertical displacement of the weighted mean (None
    for quantities without a geometric shift, like the standard form).
    ``bracketed`` is False when the search range never saw a membership
    flip, in which case ``value`` is ``+inf`` or ``-inf``.
    """

    alpha: float
    side: str                    # "lower" | "upper" | "standard" | "kl"
    value: float
    shift: Optional[float]
    method: str                  # "closed_form" | "bisection"
    tol: float
    bracketed: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


def _scale(alpha: float) -> float:
    return 4.0 / (1.0 - alpha * alpha)


def _check_alpha_open(alpha: float) -> None:
    if not -1.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (-1, 1), got {alpha}")


def _weighted_mean_point(game: Game, gamma1, gamma2, alpha: float) -> np.ndarray:
    lam1 = game.canonical_point(gamma1)
    lam2 = game.canonical_point(gamma2)
    w1, w2 = (1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0
    return w1 * lam1 + w2 * lam2


def _bisect_flip(member, lo: float, hi: float, tol: float):
    """Return the flip point of a monotone membership predicate.

    ``member(lo)`` must be True and ``member(hi)`` False; the bracket is
    shrunk until it is below ``tol``.
    """
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if member(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _search_shift(game: Game, member, tol: float):
    """Sup of {t : member(mean - t)} for an up-closed membership predicate.

    Returns (shift, bracketed).  The initial range is +-4 times the largest
    finite grid loss, doubled a few times before declaring the shift
    unbounded.
    """
    losses = game.grid_canonical_points()
    radius = 4.0 * float(np.max(losses[np.isfinite(losses)], initial=1.0))
    lo, hi = -radius, radius
    for _ in range(_BRACKET_DOUBLINGS + 1):
        lo_in, hi_in = member(lo), member(hi)
        if lo_in and not hi_in:
            return _bisect_flip(member, lo, hi, tol), True
        if lo_in and hi_in:
            hi *= 2.0
        elif not lo_in:
            lo *= 2.0
            if hi_in:
                hi *= 2.0
    # no flip found: decide which infinity from the last endpoint seen
    return (math.inf if member(hi) else -math.inf), False


def lower_alpha_divergence_numeric(game: Game, gamma1, gamma2, alpha: float,
                                   tol: float = 1e-6) -> DivergenceResult:
    """Lower alpha-divergence by bisection on the superprediction oracle."""
    _check_alpha_open(alpha)
    mean = _weighted_mean_point(game, gamma1, gamma2, alpha)
    mtol = min(1e-9, tol * 1e-2)

    def member(t):
        return is_superprediction(game, mean - t, mtol)

    shift, bracketed = _search_shift(game, member, tol)
    value = _scale(alpha) * shift if bracketed else shift
    return DivergenceResult(alpha, "lower", value, shift, "bisection", tol, bracketed)


def upper_alpha_divergence_numeric(game: Game, gamma1, gamma2, alpha: float,
                                   tol: float = 1e-6) -> DivergenceResult:
    """Upper alpha-divergence: inf of shifts reaching the subprediction set."""
    _check_alpha_open(alpha)
    mean = _weighted_mean_point(game, gamma1, gamma2, alpha)
    mtol = min(1e-9, tol * 1e-2)

    def not_member(t):
        return not is_subprediction(game, mean - t, mtol)

    # membership in the subprediction set is up-closed in t, so the
    # complement is down-closed and the same sup-search applies.
    shift, bracketed = _search_shift(game, not_member, tol)
    value = _scale(alpha) * shift if bracketed else shift
    return DivergenceResult(alpha, "upper", value, shift, "bisection", tol, bracketed)


# ---------------------------------------------------------------------------
# closed forms

def alpha_divergence_square_loss(gamma1: float, gamma2: float, alpha: float) -> float:
    """Square-loss divergence: ``(gamma1 - gamma2)^2``, independent of alpha."""
    if not -1.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [-1, 1], got {alpha}")
    d = gamma1 - gamma2
    return d * d


def alpha_divergence_log_loss(gamma1, gamma2, alpha: float) -> float:
    """Log-loss divergence: scaled negative log-affinity of the two vectors."""
    _check_alpha_open(alpha)
    g1 = np.asarray(gamma1, dtype=float)
    g2 = np.asarray(gamma2, dtype=float)
    w1, w2 = (1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0
    affinity = float(np.sum(g1 ** w1 * g2 ** w2))
    if affinity <= 0.0:
        return math.inf
    return -_scale(alpha) * math.log(affinity)


def standard_alpha_divergence_log_loss(gamma1, gamma2, alpha: float) -> float:
    """The textbook alpha-divergence; a lower bound on the game version."""
    _check_alpha_open(alpha)
    g1 = np.asarray(gamma1, dtype=float)
    g2 = np.asarray(gamma2, dtype=float)
    w1, w2 = (1.0 - alpha) / 2.0, (1.0 + alpha) / 2.0
    affinity = float(np.sum(g1 ** w1 * g2 ** w2))
    return _scale(alpha) * (1.0 - affinity)


def kl_divergence_log_loss(gamma1, gamma2) -> float:
    """Kullback-Leibler divergence, the alpha -> -1 limit of the log-loss form.

    Conventions: ``0 * ln(0/q) = 0`` and ``p * ln(p/0) = +inf`` for p > 0.
    """
    g1 = np.asarray(gamma1, dtype=float)
    g2 = np.asarray(gamma2, dtype=float)
    total = 0.0
    for p, q in zip(g1, g2):
        if p == 0.0:
            continue
        if q == 0.0:
            return math.inf
        total += p * math.log(p / q)
    return total


def closed_form_divergence(game: Game, gamma1, gamma2, alpha: float) -> Optional[float]:
    """Per-step divergence closed form for games that have one, else None."""
    if game.kind in (GameKind.SQUARE, GameKind.BOUNDED_SQUARE):
        return alpha_divergence_square_loss(gamma1, gamma2, alpha)
    if game.kind is GameKind.LOG_LOSS:
        return alpha_divergence_log_loss(gamma1, gamma2, alpha)
    return None
