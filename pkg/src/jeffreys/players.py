"""Nature and Predictor strategies for protocol runs.

Strategies are stateful objects reset at the start of each run with the
game, a dedicated random generator, and the horizon, which makes every
run reproducible from its seed.  Predictions are clamped to the game's
bounds; outcomes are validated by the protocol engine.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .games import Game, GameKind


class PredictorStrategy:
    def reset(self, game: Game, rng: np.random.Generator, horizon: int) -> None:
        pass

    def predict(self, n: int):
        raise NotImplementedError

    def observe(self, n: int, omega) -> None:
        pass


class NatureStrategy:
    def reset(self, game: Game, rng: np.random.Generator, horizon: int) -> None:
        pass

    def outcome(self, n: int, gamma1, gamma2, gamma_sceptic):
        raise NotImplementedError


class ReplayExhausted(Exception):
    """Raised by a replay Nature that has run out of recorded outcomes."""


def _clamp(game: Game, value: float) -> float:
    _, pb = game.bounds()
    if pb is None:
        return value
    return min(pb[1], max(pb[0], value))


def _prob_vector(game: Game, p1: float) -> np.ndarray:
    # binary log-loss prediction from the probability of outcome 1
    p1 = min(1.0, max(0.0, p1))
    return np.array([1.0 - p1, p1])


# ---------------------------------------------------------------------------
# natures


class ConstantNature(NatureStrategy):
    def __init__(self, omega):
        self.omega0 = omega

    def reset(self, game, rng, horizon):
        self._value = int(self.omega0) if game.kind is GameKind.LOG_LOSS else float(self.omega0)

    def outcome(self, n, gamma1, gamma2, gamma_sceptic):
        return self._value


class IidBernoulliNature(NatureStrategy):
    """Outcome 1 with probability p, else 0; for binary or log-loss games."""

    def __init__(self, p: float = 0.5):
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"bernoulli p must lie in [0, 1], got {p}")
        self.p = p

    def reset(self, game, rng, horizon):
        self._draws = rng.random(horizon) < self.p
        self._log = game.kind is GameKind.LOG_LOSS

    def outcome(self, n, gamma1, gamma2, gamma_sceptic):
        hit = bool(self._draws[n - 1])
        if self._log:
            return 1 if hit else 0
        return 1.0 if hit else 0.0


class IidUniformNature(NatureStrategy):
    def __init__(self, lo: float = 0.0, hi: float = 1.0):
        if hi <= lo:
            raise ConfigError("uniform nature needs lo < hi")
        self.lo, self.hi = lo, hi

    def reset(self, game, rng, horizon):
        if game.kind is GameKind.LOG_LOSS:
            raise ConfigError("uniform nature is undefined for log-loss outcomes")
        self._draws = rng.uniform(self.lo, self.hi, horizon)

    def outcome(self, n, gamma1, gamma2, gamma_sceptic):
        return float(self._draws[n - 1])


class ReplayNature(NatureStrategy):
    """Replays a recorded outcome sequence; truncates the run when exhausted."""

    def __init__(self, values: Sequence[float]):
        self.values = list(values)

    @classmethod
    def from_file(cls, path) -> "ReplayNature":
        with open(path, "r", encoding="utf-8") as fh:
            return cls([float(line) for line in fh if line.strip()])

    def reset(self, game, rng, horizon):
        self._log = game.kind is GameKind.LOG_LOSS

    def outcome(self, n, gamma1, gamma2, gamma_sceptic):
        if n - 1 >= len(self.values):
            raise ReplayExhausted(f"replay provides only {len(self.values)} outcomes")
        v = self.values[n - 1]
        return int(v) if self._log else float(v)


class AdversarialGreedyNature(NatureStrategy):
    """Picks, from a candidate grid, the outcome maximizing the sceptic's
    loss over the better predictor's; ties break toward the smaller
    outcome."""

    def __init__(self, candidates: Optional[Sequence[float]] = None):
        self.candidates = candidates

    def reset(self, game, rng, horizon):
        self._game = game
        if self.candidates is not None:
            self._cands = list(self.candidates)
        elif game.kind is GameKind.LOG_LOSS:
            self._cands = list(range(game.m))
        else:
            self._cands = [0.0, 1.0]

    def outcome(self, n, gamma1, gamma2, gamma_sceptic):
        game = self._game
        best, best_score = None, -math.inf
        for w in self._cands:
            score = (game.loss(w, gamma_sceptic)
                     - min(game.loss(w, gamma1), game.loss(w, gamma2)))
            if score > best_score:
                best, best_score = w, score
        return best


# ---------------------------------------------------------------------------
# predictors


class ConstantPredictor(PredictorStrategy):
    def __init__(self, gamma):
        self.gamma0 = gamma

    def reset(self, game, rng, horizon):
        if game.kind is GameKind.LOG_LOSS:
            g = np.asarray(self.gamma0, dtype=float)
            if g.ndim == 0:
                g = _prob_vector(game, float(g))
            self._value = g
        else:
            self._value = _clamp(game, float(self.gamma0))

    def predict(self, n):
        return self._value


class RunningMeanPredictor(PredictorStrategy):
    """Predicts the mean of past outcomes, starting from an initial value.

    For log-loss games this is the add-one-smoothed outcome frequency,
    which keeps every probability strictly positive.
    """

    def __init__(self, initial: float = 0.5):
        self.initial = initial

    def reset(self, game, rng, horizon):
        self._game = game
        self._log = game.kind is GameKind.LOG_LOSS
        if self._log:
            self._counts = np.ones(game.m)
        else:
            self._sum = 0.0
            self._n = 0

    def predict(self, n):
        if self._log:
            return self._counts / self._counts.sum()
        if self._n == 0:
            return _clamp(self._game, self.initial)
        return _clamp(self._game, self._sum / self._n)

    def observe(self, n, omega):
        if self._log:
            self._counts[int(omega)] += 1.0
        else:
            self._sum += omega
            self._n += 1


class NoisyTargetPredictor(PredictorStrategy):
    """Predicts a fixed target plus seeded noise with scale ``sigma/n``.

    Two independent copies converge toward each other fast enough that the
    sum of their squared gaps stays finite, exercising the agreeing-
    forecasters branch of the disjunctions.
    """

    def __init__(self, target: float, sigma: float = 0.15):
        self.target = target
        self.sigma = sigma

    def reset(self, game, rng, horizon):
        self._game = game
        self._log = game.kind is GameKind.LOG_LOSS
        self._noise = rng.standard_normal(horizon)

    def predict(self, n):
        value = self.target + self.sigma * self._noise[n - 1] / n
        if self._log:
            return _prob_vector(self._game, value)
        return _clamp(self._game, value)


class DriftPredictor(PredictorStrategy):
    """Starts at gamma0 and drifts by delta per step, clamped to bounds."""

    def __init__(self, gamma0: float, delta: float):
        self.gamma0 = gamma0
        self.delta = delta

    def reset(self, game, rng, horizon):
        self._game = game
        self._log = game.kind is GameKind.LOG_LOSS

    def predict(self, n):
        value = self.gamma0 + self.delta * (n - 1)
        if self._log:
            return _prob_vector(self._game, value)
        return _clamp(self._game, value)


# ---------------------------------------------------------------------------
# descriptor-based construction (the CLI speaks in these)

_NATURE_KINDS = {
    "constant": lambda params: ConstantNature(params["omega"]),
    "iid_bernoulli": lambda params: IidBernoulliNature(params.get("p", 0.5)),
    "iid_uniform": lambda params: IidUniformNature(params.get("lo", 0.0),
                                                   params.get("hi", 1.0)),
    "replay": lambda params: (ReplayNature.from_file(params["file"])
                              if "file" in params else ReplayNature(params["values"])),
    "adversarial_greedy": lambda params: AdversarialGreedyNature(params.get("candidates")),
}

_PREDICTOR_KINDS = {
    "constant": lambda params: ConstantPredictor(params["gamma"]),
    "running_mean": lambda params: RunningMeanPredictor(params.get("initial", 0.5)),
    "noisy_target": lambda params: NoisyTargetPredictor(params["target"],
                                                        params.get("sigma", 0.15)),
    "drift": lambda params: DriftPredictor(params["gamma0"], params["delta"]),
}


def nature_strategy(kind: str, params: Optional[dict] = None) -> NatureStrategy:
    try:
        factory = _NATURE_KINDS[kind]
    except KeyError:
        raise ConfigError(f"unknown nature kind {kind!r}; "
                          f"options: {sorted(_NATURE_KINDS)}") from None
    return factory(params or {})


def predictor_strategy(kind: str, params: Optional[dict] = None) -> PredictorStrategy:
    try:
        factory = _PREDICTOR_KINDS[kind]
    except KeyError:
        raise ConfigError(f"unknown predictor kind {kind!r}; "
                          f"options: {sorted(_PREDICTOR_KINDS)}") from None
    return factory(params or {})
