__all__ = [
    "UsageError",
    "ConfigError",
    "SimulationError",
    "ConnectivityWarning",
    "TruncationWarning",
    "AbsorptionWarning",
]


class UsageError(ValueError):
    """Raised when an operation is called with arguments outside its domain

    Out-of-range vertex labels, oversize motifs, parameter regimes an estimator does not
    cover, or inputs too large for an exact method.
    """

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)


class ConfigError(Exception):
    """Raised when an experiment configuration cannot be read or fails validation"""

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)


class SimulationError(RuntimeError):
    """Raised when a run fails after its configuration was accepted"""

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)


class ConnectivityWarning(UserWarning):
    """Raised to alert user that the initial graph has vanishing common-neighbour density.

    The finite-to-limit comparison assumes the initial graphs stay dense; with nu = 0 the
    comparison may not be meaningful.
    """

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)


class TruncationWarning(UserWarning):
    """Raised when a reported quantity is a bound rather than an exact value"""

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)


class AbsorptionWarning(UserWarning):
    """Raised when a flow that needs an interior colour density hits consensus and is frozen"""

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)
