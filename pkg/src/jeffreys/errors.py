"""Exception types shared across the package."""


class JeffreysError(Exception):
    """Base class for all package errors."""


class DomainError(JeffreysError):
    """An outcome or prediction falls outside the game's declared spaces."""


class ConfigError(JeffreysError):
    """A run configuration is malformed or internally inconsistent."""


class ProtocolViolationError(JeffreysError):
    """A strategy emitted an out-of-domain move during a protocol run."""

    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


class PoolCollapseError(JeffreysError):
    """Every expert in an aggregating pool has been eliminated."""


class MixabilityViolation(JeffreysError):
    """A mixing step produced a generalized prediction no single prediction
    can match, or a strategy requiring a mixable game was given one that
    is not."""


class DivergenceOverestimate(JeffreysError):
    """Numeric search failed to find a canonical point below the divergence
    target; signals mismatched tolerances between the divergence estimate
    and the membership oracle."""
