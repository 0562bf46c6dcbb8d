"""Exception types shared across the package."""


class BanditError(ValueError):
    """Base class for all errors raised by satbandits."""


class RangeError(BanditError):
    """A time index, arm index or interval is outside the valid range."""


class ContractError(BanditError):
    """A caller broke an operation's precondition (wrong length, wrong order, ...)."""


class DomainError(BanditError):
    """An argument lies outside the mathematical domain of a formula."""


class ParameterError(BanditError):
    """Instance-family parameters violate a named constraint."""

    def __init__(self, constraint: str, detail: str = ""):
        self.constraint = constraint
        msg = constraint if not detail else f"{constraint}: {detail}"
        super().__init__(msg)
