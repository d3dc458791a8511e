"""Exception hierarchy shared across the package."""


class TradeNetError(Exception):
    """Base class for every error raised by tradenet."""


class ModelError(TradeNetError, ValueError):
    """A network, contract or outcome violates a structural invariant."""


class UnknownFirmError(ModelError, KeyError):
    pass


class ChoiceContractError(TradeNetError):
    """A choice function was consulted outside its domain or returned a non-subset."""


class BudgetExceeded(TradeNetError):
    """An exponential search hit its configured cap before finishing."""

    def __init__(self, what: str, limit: int, used: int | None = None):
        self.what = what
        self.limit = limit
        self.used = used
        msg = f"{what}: budget of {limit} exceeded"
        if used is not None:
            msg += f" (needed {used})"
        super().__init__(msg)


class NotFullySubstitutableError(TradeNetError):
    """Deferred acceptance produced something that fails verification.

    This only happens when some choice function is not fully substitutable
    or violates IRC.
    """


class SchemaError(TradeNetError, ValueError):
    """A JSON document does not match its schema or has dangling references."""
