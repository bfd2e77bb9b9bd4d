"""Exception types raised across the package."""


class ZeroProbabilityEvent(ValueError):
    """Conditioning on an event that has probability zero."""


class DiscontinuousCdf(ValueError):
    """Threshold equations have no solution because the CDF jumps."""


class HorizonTooLarge(ValueError):
    """Exhaustive enumeration requested on a horizon that is too long."""


class InfeasibleAction(RuntimeError):
    """A trader tried to buy while holding or to sell while empty."""


class ProtocolViolation(RuntimeError):
    """The adaptive adversary was queried outside its protocol."""


class BoundViolated(AssertionError):
    """A proven inequality failed numerically; signals an implementation bug."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateFit(ValueError):
    """Ratio regression is ill-posed (the online profit does not vary)."""


class LookaheadViolation(IndexError):
    """A lookahead policy read a price beyond its revealed window."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
