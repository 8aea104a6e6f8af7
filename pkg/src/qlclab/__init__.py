"""Quasi-linear codes over prime fields: construction, covering bounds and
desk-scale coding experiments."""

from .errors import CapExceededError, EmptyTypicalSetError, InvalidScenarioError

__version__ = "0.1.0"

__all__ = ["CapExceededError", "EmptyTypicalSetError", "InvalidScenarioError", "__version__"]
