class CapExceededError(RuntimeError):
    """An exhaustive enumeration would exceed its configured size cap."""


class EmptyTypicalSetError(ValueError):
    """Some index component has no typical sequences at the requested epsilon."""


class InvalidScenarioError(ValueError):
    pass


DEFAULT_CAP = 2**24
PAIR_CAP = 2**28
