"""Exception types raised across the package."""


class GossipError(Exception):
    """Base class for all package errors."""


class InvalidTopologyError(GossipError, ValueError):
    """Graph parameters or edge lists that do not describe a valid simple graph."""


class DisconnectedGraphError(GossipError, ValueError):
    """The graph is not connected, so consensus rates are undefined."""


class UnconnectedGraphError(DisconnectedGraphError):
    """Random geometric sampling never produced a connected graph."""

    def __init__(self, attempts: int, n: int, r: float):
        self.attempts = attempts
        self.n = n
        self.r = r
        super().__init__(
            f"no connected G({n}, r={r:g}) after {attempts} attempts"
        )


class AlreadyOptimalError(GossipError, ValueError):
    """The initial vector is already at consensus; relative error is undefined."""


class ConfigError(GossipError, ValueError):
    """Experiment configuration failed validation."""
