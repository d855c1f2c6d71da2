"""Sceptic strategies that certify agreement between two forecasters.

Three constructions, ordered by the strength of what they certify:

* the divergence strategy (``Level2Sceptic``): picks a canonical point
  sitting below the alpha-weighted mean of the predictors' loss profiles
  by the per-step lower divergence, giving a cumulative inequality that
  forces the divergence sum to be dominated by the loss advantage;
* the mixture-weighting strategy (``Level1Sceptic``): for convex games
  with zero divergence (absolute loss), weights the two predictors by an
  odd saturating function of their loss difference and keeps an exact
  integral/triangle ledger of its excess over their average loss;
* the threshold lift (``Level3Sceptic``): aggregates a doubly-indexed
  pool of experts that mimic a base sceptic until a predictor falls a
  power-of-two behind it, then permanently defect to that predictor;
  requires a perfectly mixable game.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .aggregating import (DOMINATION_TOL, ExpertPool, MixabilityParams,
                          _lse1, _substitute_bounded_square, aa_observe,
                          generalized_prediction, log_sum_exp, params_for,
                          substitute)
from .divergence import lower_alpha_divergence_numeric
from .errors import (DivergenceOverestimate, MixabilityViolation,
                     PoolCollapseError)
from .games import Game, GameKind, Prediction, check_perfectly_mixable


class ScepticStrategy:
    """Base interface: predict after the predictors move, observe after Nature."""

    def reset(self, game: Game, rng: np.random.Generator, horizon: int) -> None:
        pass

    def predict(self, n: int, gamma1: Prediction, gamma2: Prediction) -> Prediction:
        raise NotImplementedError

    def observe(self, n: int, omega) -> None:
        pass


# ---------------------------------------------------------------------------
# level 2: the divergence strategy


@dataclass(frozen=True)
class Level2Config:
    alpha: float
    epsilon: float = 1e-3

    def __post_init__(self):
        if not -1.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly inside (-1, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


def level2_step(game: Game, gamma1, gamma2, cfg: Level2Config, n: int) -> Prediction:
    """One move of the divergence strategy at (1-based) step ``n``.

    Square-loss games admit the exact weighted mean of the predictions and
    log-loss games the normalized geometric mixture, neither consuming any
    slack.  Other games search the prediction grid for a canonical point
    below the divergence target, spending ``epsilon * 2^-n`` of the slack
    budget to absorb the numeric divergence estimate's error.
    """
    w1, w2 = (1.0 - cfg.alpha) / 2.0, (1.0 + cfg.alpha) / 2.0
    if game.kind in (GameKind.SQUARE, GameKind.BOUNDED_SQUARE):
        return w1 * gamma1 + w2 * gamma2
    if game.kind is GameKind.LOG_LOSS:
        if game.m == 2:
            a = float(gamma1[0]) ** w1 * float(gamma2[0]) ** w2
            b = float(gamma1[1]) ** w1 * float(gamma2[1]) ** w2
            total = a + b
            if total <= 0.0:
                raise DivergenceOverestimate(
                    "predictions have disjoint support; divergence is infinite")
            return np.array((a / total, b / total))
        g1 = np.asarray(gamma1, dtype=float)
        g2 = np.asarray(gamma2, dtype=float)
        raw = g1 ** w1 * g2 ** w2
        total = float(raw.sum())
        if total <= 0.0:
            raise DivergenceOverestimate(
                "predictions have disjoint support; divergence is infinite")
        return raw / total
    return _level2_numeric(game, gamma1, gamma2, cfg, n)


def _level2_numeric(game: Game, gamma1, gamma2, cfg: Level2Config, n: int) -> Prediction:
    from .games import _ext_diff, _min_gap

    slack = cfg.epsilon * 2.0 ** (-n)
    # underestimate the divergence shift by more than the search can err
    div = lower_alpha_divergence_numeric(game, gamma1, gamma2, cfg.alpha,
                                         tol=slack / 4.0)
    lam1 = game.canonical_point(gamma1)
    lam2 = game.canonical_point(gamma2)
    w1, w2 = (1.0 - cfg.alpha) / 2.0, (1.0 + cfg.alpha) / 2.0
    target = w1 * lam1 + w2 * lam2 - (div.shift - slack / 2.0)

    def gap(params):
        L = game.losses_for_params(np.atleast_1d(params))
        return np.max(_ext_diff(L, target[None, :]), axis=1)

    u, worst = _min_gap(game, gap, DOMINATION_TOL)
    if worst > slack / 4.0:
        raise DivergenceOverestimate(
            f"no canonical point within {slack / 4.0:.3g} of the divergence target")
    return game.prediction_from_param(u)


class Level2Sceptic(ScepticStrategy):
    """Stateful wrapper around :func:`level2_step` for protocol runs."""

    def __init__(self, alpha: float, epsilon: float = 1e-3):
        self.cfg = Level2Config(alpha, epsilon)
        self.alpha = self.cfg.alpha
        self.epsilon = self.cfg.epsilon
        self._game: Optional[Game] = None

    def reset(self, game, rng, horizon):
        self._game = game

    def predict(self, n, gamma1, gamma2):
        return level2_step(self._game, gamma1, gamma2, self.cfg, n)


def level2_inequality_slack(trace, alpha: float, epsilon: float) -> np.ndarray:
    """Slack series of the cumulative divergence inequality, one value per step.

    ``slack(N) = w1 L1(N) + w2 L2(N) - Lsceptic(N) + epsilon - sum of
    divergence terms``; nonnegative for a faithful strategy, and exactly
    ``epsilon`` for the square-loss closed form.  Accumulated in extended
    precision so the equality case can be checked to 1e-12.
    """
    w1 = np.longdouble(1.0 - alpha) / 2.0
    w2 = np.longdouble(1.0 + alpha) / 2.0
    coeff = (np.longdouble(1.0) - np.longdouble(alpha) ** 2) / 4.0
    l1 = np.asarray(trace.loss1, dtype=np.longdouble)
    l2 = np.asarray(trace.loss2, dtype=np.longdouble)
    ls = np.asarray(trace.loss_sceptic, dtype=np.longdouble)
    d = np.asarray(trace.divergence_term, dtype=np.longdouble)
    increments = w1 * l1 + w2 * l2 - ls - coeff * d
    return np.cumsum(increments) + np.longdouble(epsilon)


# ---------------------------------------------------------------------------
# level 1: the loss-difference mixture strategy


def f_mix(x: float, c: float) -> float:
    """Odd, strictly increasing, concave-on-the-right weighting function.

    ``c x / (1 + |x|)``: zero at zero, saturating at ``c < 1/2``.
    """
    return c * x / (1.0 + abs(x))


def f_mix_integral(x: float, c: float) -> float:
    """Integral of :func:`f_mix` from 0 to x; even, with closed form."""
    ax = abs(x)
    return c * (ax - math.log1p(ax))


def _area_piece(a: float, delta: float, c: float) -> float:
    # area between f and the level f(a) over a sign-constant interval
    # [a, a + delta]; reduces to u - log1p(u) >= 0, which is stable where
    # the naive integral difference cancels catastrophically
    if delta == 0.0:
        return 0.0
    if a > 0.0 or (a == 0.0 and delta > 0.0):
        u = delta / (1.0 + a)
    else:
        u = -delta / (1.0 - a)
    return max(0.0, c * (u - math.log1p(u)))


def triangle_area(d_old: float, delta: float, c: float) -> float:
    """Area of the curvilinear triangle swept while D moves by ``delta``.

    Equals ``integral(f, d_old..d_old+delta) - f(d_old) * delta``; always
    nonnegative since f is increasing.  Sign-crossing moves are split at
    zero so every term is individually nonnegative in floating point.
    """
    d_new = d_old + delta
    if (d_old >= 0.0) == (d_new >= 0.0) or d_new == 0.0:
        return _area_piece(d_old, delta, c)
    first = _area_piece(d_old, -d_old, c)
    second = _area_piece(0.0, d_new, c)
    across = -f_mix(d_old, c) * d_new
    return first + second + max(0.0, across)


@dataclass
class Level1State:
    """Ledger state of the mixture strategy.

    ``D`` is the predictors' cumulative loss difference, ``triangle_sum``
    the accumulated curvilinear-triangle areas, ``excess`` the sceptic's
    realized loss over the predictors' average.  The ledger bound
    ``integral(f, 0..D) - triangle_sum`` dominates ``excess`` at all times,
    exactly so while every outcome falls outside the predictors' gap.
    """

    c: float = 0.4
    D: float = 0.0
    triangle_sum: float = 0.0
    excess: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.c < 0.5:
            raise ValueError("c must lie in (0, 1/2)")

    @property
    def ledger_integral(self) -> float:
        return f_mix_integral(self.D, self.c)

    @property
    def ledger_bound(self) -> float:
        return self.ledger_integral - self.triangle_sum


def level1_step(state: Level1State, gamma1, gamma2):
    """Weight the predictors by the current loss difference.

    Returns ``(1/2 + f(D)) gamma1 + (1/2 - f(D)) gamma2``; the further
    predictor 1 is behind (large D), the more weight it gets, capped at
    ``1/2 + c``.  Swapping the predictors and negating D gives the same
    move, by oddness of f.
    """
    w = f_mix(state.D, state.c)
    return (0.5 + w) * gamma1 + (0.5 - w) * gamma2


@dataclass
class Level1Audit:
    """Per-step ledger entries produced by :func:`level1_ledger_update`."""

    triangle_area: float
    excess: float          # cumulative sceptic loss over the predictors' average
    bound: float           # cumulative ledger bound


def level1_ledger_update(game: Game, state: Level1State, omega,
                         gamma1, gamma2, gamma_sceptic) -> Level1Audit:
    """Advance the ledger after Nature's move; mutates ``state``.

    The triangle area uses the closed-form integral of f, so the ledger
    is exact up to float rounding: no quadrature is involved.
    """
    l1 = game.loss(omega, gamma1)
    l2 = game.loss(omega, gamma2)
    ls = game.loss(omega, gamma_sceptic)
    d_old = state.D
    delta = l1 - l2
    area = triangle_area(d_old, delta, state.c)
    state.D = d_old + delta
    state.triangle_sum += area
    state.excess += ls - 0.5 * (l1 + l2)
    return Level1Audit(area, state.excess, state.ledger_bound)


class Level1Sceptic(ScepticStrategy):
    """Protocol wrapper keeping the ledger and its full audit trail."""

    def __init__(self, c: float = 0.4, record_audit: bool = True):
        self.c = c
        self.record_audit = record_audit
        self.state = Level1State(c=c)
        self.audit_areas: list = []
        self.audit_excess: list = []
        self.audit_bounds: list = []
        self._game: Optional[Game] = None
        self._pending = None

    def reset(self, game, rng, horizon):
        self._game = game
        self.state = Level1State(c=self.c)
        self.audit_areas, self.audit_excess, self.audit_bounds = [], [], []
        self._pending = None

    def predict(self, n, gamma1, gamma2):
        gamma = level1_step(self.state, gamma1, gamma2)
        self._pending = (gamma1, gamma2, gamma)
        return gamma

    def observe(self, n, omega):
        gamma1, gamma2, gamma = self._pending
        audit = level1_ledger_update(self._game, self.state, omega,
                                     gamma1, gamma2, gamma)
        if self.record_audit:
            self.audit_areas.append(audit.triangle_area)
            self.audit_excess.append(audit.excess)
            self.audit_bounds.append(audit.bound)


# ---------------------------------------------------------------------------
# aggregation engine shared by the pool-based sceptics


class _AAEngine:
    """Mix-and-substitute core: one pool, one game, running regret audit.

    Tracks the per-expert cumulative losses, the strategy's own cumulative
    loss, and the worst regret slack seen so far.  Every observation also
    re-checks domination at the realized outcome with the weights that
    produced the move.
    """

    def __init__(self, game: Game, pool: ExpertPool, eta: float, C: float,
                 domination_tol: float, record: bool = False):
        self.game = game
        self.pool = pool
        self.eta = eta
        self.C = C
        self.domination_tol = domination_tol
        self.expert_cums = np.zeros(len(pool))
        self.cum_self = 0.0
        # compensation terms: cumulative losses reach magnitudes where the
        # plain running sums' rounding would drown the regret slack
        self._comp_experts = np.zeros(len(pool))
        self._comp_self = 0.0
        self._penalty = C * np.log(1.0 / pool.priors)
        self.worst_eq8_slack = math.inf
        self.record = record
        self.expert_cum_history: list = []
        self.self_cum_history: list = []
        self._log_w_norm: Optional[np.ndarray] = None

    def _normalized_log_weights(self) -> np.ndarray:
        lw = self.pool.log_weights
        total = _lse1(lw)
        if total == -math.inf:
            raise PoolCollapseError("every expert has suffered infinite loss")
        return lw - total

    def mix(self, preds):
        """Predictions array (K,) or (K, m) -> the pool's aggregated move."""
        game = self.game
        log_w = self._normalized_log_weights()
        self._log_w_norm = log_w
        eta = self.eta
        if game.kind is GameKind.BOUNDED_SQUARE:
            # the outcome-interval endpoints pin down the substitution
            g0 = -_lse1(log_w - eta * (preds * preds)) / eta
            g1 = -_lse1(log_w - eta * (1.0 - preds) ** 2) / eta
            return _substitute_bounded_square(g0, g1)
        if game.kind is GameKind.LOG_LOSS:
            # the mixture of probability vectors; for eta <= 1 the mass is
            # at most one and renormalizing only raises the prediction
            if eta == 1.0:
                w = np.exp(log_w)
                raw = w @ preds
            else:
                with np.errstate(divide="ignore"):
                    points = -np.log(preds)
                with np.errstate(invalid="ignore"):
                    exponents = log_w[:, None] - eta * points
                exponents = np.where(np.isnan(exponents), -np.inf, exponents)
                g = -log_sum_exp(exponents, axis=0) / eta
                raw = np.exp(-g)
            total = float(raw.sum())
            if total <= 0.0:
                raise MixabilityViolation("generalized prediction is infinite everywhere")
            if total > 1.0 + self.domination_tol:
                raise MixabilityViolation(
                    f"substitution excess {math.log(total):.3g} exceeds tolerance")
            return raw / total
        points = np.stack([game.canonical_point(p) for p in preds])
        g = generalized_prediction(self.pool, points, self.eta)
        return substitute(game, g, self.domination_tol)

    def expert_losses(self, omega, preds) -> np.ndarray:
        game = self.game
        if game.kind is GameKind.BOUNDED_SQUARE:
            return (omega - preds) ** 2
        if game.kind is GameKind.LOG_LOSS:
            p = preds[:, int(omega)]
            with np.errstate(divide="ignore"):
                return np.where(p > 0.0, -np.log(np.maximum(p, 1e-300)), np.inf)
        return np.array([game.loss(omega, p) for p in preds])

    def observe(self, n, omega, preds, own_loss) -> np.ndarray:
        losses = self.expert_losses(omega, preds)
        log_w = self._log_w_norm if self._log_w_norm is not None \
            else self._normalized_log_weights()
        # -inf - inf stays -inf, so eliminated experts drop out cleanly
        g_played = -_lse1(log_w - self.eta * losses) / self.eta
        if own_loss > g_played + self.domination_tol:
            raise MixabilityViolation(
                f"step {n}: loss {own_loss:.6g} exceeds mixture bound {g_played:.6g}")
        aa_observe(self.pool, losses, self.eta)
        self._log_w_norm = None
        # Neumaier-compensated accumulation on both sides of the slack
        total = self.expert_cums + losses
        resid = np.where(np.abs(self.expert_cums) >= np.abs(losses),
                         (self.expert_cums - total) + losses,
                         (losses - total) + self.expert_cums)
        self._comp_experts += np.where(np.isfinite(resid), resid, 0.0)
        self.expert_cums = total
        t = self.cum_self + own_loss
        resid_s = ((self.cum_self - t) + own_loss
                   if abs(self.cum_self) >= abs(own_loss)
                   else (own_loss - t) + self.cum_self)
        if math.isfinite(resid_s):
            self._comp_self += resid_s
        self.cum_self = t
        slack = (float(np.min(self.expert_cums + self._comp_experts + self._penalty))
                 - (self.cum_self + self._comp_self))
        if slack < self.worst_eq8_slack:
            self.worst_eq8_slack = slack
        if self.record:
            self.expert_cum_history.append(self.expert_cums + self._comp_experts)
            self.self_cum_history.append(self.cum_self + self._comp_self)
        return losses


def _resolve_params(game: Game, params: Optional[MixabilityParams]) -> MixabilityParams:
    resolved = params or params_for(game)
    if not check_perfectly_mixable(game, resolved.eta):
        raise MixabilityViolation(
            f"{game.kind.value} game fails the mixability test at eta={resolved.eta}")
    return resolved


class AggregatingSceptic(ScepticStrategy):
    """Plays the aggregating mixture of a fixed pool of expert strategies.

    The protocol's two predictors are ignored; the experts are the
    sceptic's own.  ``worst_eq8_slack`` exposes the tightest regret slack
    seen, and ``record=True`` keeps the full cumulative-loss history for
    offline slack series."""

    def __init__(self, experts, priors=None,
                 params: Optional[MixabilityParams] = None,
                 domination_tol: float = DOMINATION_TOL, record: bool = False):
        if not experts:
            raise ValueError("expert pool must not be empty")
        self.experts = list(experts)
        self.priors = (np.asarray(priors, dtype=float) if priors is not None
                       else np.full(len(experts), 1.0 / len(experts)))
        self._params = params
        self.domination_tol = domination_tol
        self.record = record
        self.engine: Optional[_AAEngine] = None

    def reset(self, game, rng, horizon):
        from .players import ConstantPredictor

        params = _resolve_params(game, self._params)
        self.eta, self.C = params.eta, params.C
        streams = rng.spawn(len(self.experts))
        for expert, stream in zip(self.experts, streams):
            expert.reset(game, stream, horizon)
        self.engine = _AAEngine(game, ExpertPool(self.priors), params.eta,
                                params.C, self.domination_tol, self.record)
        self._game = game
        self._loss = game.loss_fn()
        # a pool of constants emits the same prediction matrix every step
        self._static_preds = None
        if all(isinstance(e, ConstantPredictor) for e in self.experts):
            self._static_preds = self._collect(1)
        self._pending = None

    @property
    def worst_eq8_slack(self) -> float:
        return self.engine.worst_eq8_slack if self.engine else math.inf

    def _collect(self, n):
        raw = [e.predict(n) for e in self.experts]
        if self._game.kind is GameKind.LOG_LOSS:
            return np.stack(raw)
        return np.asarray(raw, dtype=float)

    def predict(self, n, gamma1, gamma2):
        preds = self._static_preds if self._static_preds is not None \
            else self._collect(n)
        gamma = self.engine.mix(preds)
        self._pending = (preds, gamma)
        return gamma

    def observe(self, n, omega):
        preds, gamma = self._pending
        own = self._loss(omega, gamma)
        self.engine.observe(n, omega, preds, own)
        if self._static_preds is None:
            for e in self.experts:
                e.observe(n, omega)


# ---------------------------------------------------------------------------
# level 3: the threshold-expert lift


@dataclass(frozen=True)
class Level3Config:
    """Truncated pool of threshold experts: two per threshold ``2^k``."""

    k_max: int = 20

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")

    def thresholds(self) -> np.ndarray:
        return 2.0 ** np.arange(1, self.k_max + 1)

    def priors(self) -> np.ndarray:
        # expert (k, j) carries prior 2^-(k+1); the pool sums to 1 - 2^-k_max
        p = 2.0 ** -(np.arange(1, self.k_max + 1) + 1)
        return np.concatenate([p, p])


class Level3Sceptic(ScepticStrategy):
    """Aggregates threshold experts over a base sceptic strategy.

    Expert ``(k, 1)`` mimics the base sceptic until predictor 1 trails the
    base sceptic's cumulative loss by more than ``2^k``, then switches to
    predictor 1 for good; expert ``(k, 2)`` watches predictor 2.  The pool
    is mixed with the game's aggregation parameters; reset refuses games
    that fail the perfect-mixability test.
    """

    def __init__(self, base: ScepticStrategy, cfg: Level3Config = Level3Config(),
                 params: Optional[MixabilityParams] = None,
                 domination_tol: float = DOMINATION_TOL):
        self.base = base
        self.cfg = cfg
        self._params = params
        self.domination_tol = domination_tol
        self._game: Optional[Game] = None
        self.engine: Optional[_AAEngine] = None

    def reset(self, game, rng, horizon):
        params = _resolve_params(game, self._params)
        self._game = game
        self.eta, self.C = params.eta, params.C
        self.base.reset(game, rng, horizon)
        self.cum1 = 0.0
        self.cum2 = 0.0
        self.cum_base = 0.0
        k = self.cfg.k_max
        self.thresholds = np.concatenate([self.cfg.thresholds(), self.cfg.thresholds()])
        self.switched = np.zeros(2 * k, dtype=bool)
        self.engine = _AAEngine(game, ExpertPool(self.cfg.priors()), params.eta,
                                params.C, self.domination_tol)
        self.switch_times: dict = {}
        self._loss = game.loss_fn()
        self._targets = (np.empty((2 * k, game.m)) if game.kind is GameKind.LOG_LOSS
                         else np.empty(2 * k))
        self._pending = None

    @property
    def worst_eq8_slack(self) -> float:
        return self.engine.worst_eq8_slack if self.engine else math.inf

    @property
    def cum_self(self) -> float:
        return self.engine.cum_self

    def _expert_predictions(self, gamma1, gamma2, gamma_base):
        k = self.cfg.k_max
        targets = self._targets
        targets[:k] = gamma1
        targets[k:] = gamma2
        if self._game.kind is GameKind.LOG_LOSS:
            return np.where(self.switched[:, None], targets,
                            np.asarray(gamma_base)[None, :])
        return np.where(self.switched, targets, gamma_base)

    def predict(self, n, gamma1, gamma2):
        gamma_base = self.base.predict(n, gamma1, gamma2)
        preds = self._expert_predictions(gamma1, gamma2, gamma_base)
        gamma = self.engine.mix(preds)
        self._pending = (gamma1, gamma2, gamma_base, preds, gamma)
        return gamma

    def observe(self, n, omega):
        gamma1, gamma2, gamma_base, preds, gamma = self._pending
        self.base.observe(n, omega)
        loss = self._loss
        self.engine.observe(n, omega, preds, loss(omega, gamma))
        self.cum1 += loss(omega, gamma1)
        self.cum2 += loss(omega, gamma2)
        self.cum_base += loss(omega, gamma_base)
        k = self.cfg.k_max
        if not np.all(self.switched):
            behind = np.empty(2 * k)
            behind[:k] = self.cum1 - self.cum_base
            behind[k:] = self.cum2 - self.cum_base
            newly = (~self.switched) & (behind > self.thresholds)
            if np.any(newly):
                for i in np.nonzero(newly)[0]:
                    self.switch_times[int(i)] = n
                self.switched = self.switched | newly


def level3_strategy(base: ScepticStrategy, cfg: Level3Config = Level3Config(),
                    params: Optional[MixabilityParams] = None) -> Level3Sceptic:
    """Convenience constructor mirroring the other strategy factories."""
    return Level3Sceptic(base, cfg, params)
