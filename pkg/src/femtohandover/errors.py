"""Exception types shared across the simulator."""


class FemtoSimError(Exception):
    """Base class for simulator errors."""


class InputError(FemtoSimError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(FemtoSimError, ValueError):
    """A scenario or session was configured inconsistently."""


class StateError(FemtoSimError, RuntimeError):
    """An operation was requested in a state that does not allow it."""


class ProtocolError(FemtoSimError):
    """A signaling message arrived out of script order."""

    def __init__(self, expected: int, received: int, session_id: int | None = None):
        self.expected = expected
        self.received = received
        self.session_id = session_id
        where = "" if session_id is None else f" in session {session_id}"
        super().__init__(
            f"out-of-order message{where}: expected step {expected}, received step {received}"
        )


class SimulationError(FemtoSimError, RuntimeError):
    """An event handler failed; the message names the offending event."""
