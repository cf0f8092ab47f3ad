"""Exception hierarchy shared by every crooklab module."""


class CrookLabError(Exception):
    """Base class for all library errors."""


class DomainError(CrookLabError, ValueError):
    """A bit-string or point does not fit the declared domain."""


class BudgetError(CrookLabError):
    """A query budget (q1, q2, tau) was exceeded."""


class ContractViolation(CrookLabError):
    """An implementation broke the evaluation contract (distinctness, advice, tau)."""


class SizeLimitError(CrookLabError):
    """An exhaustive computation was requested beyond its size cap."""


class SaturationError(CrookLabError):
    """The sponge simulator ran out of fresh capacity values."""


class GraphCorruptionError(CrookLabError):
    """The sponge simulator graph lost a path invariant."""


class ConfigError(CrookLabError, ValueError):
    """An experiment configuration is malformed or references unknown names."""
