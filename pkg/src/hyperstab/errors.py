"""Exception taxonomy shared by all modules.

Each class maps to a distinct CLI exit code (see ``hyperstab.cli``).
"""


class HyperstabError(Exception):
    """Base class for all package errors."""


class InputError(HyperstabError):
    """Malformed or out-of-contract input data (bad matrix, short history, ...)."""


class ConfigError(HyperstabError):
    """A configuration constraint is violated; the message names the constraint."""


class DynamicsError(HyperstabError):
    """The simulated dynamics left the admissible regime (blow-up, lost
    monotonicity, speed outside its domain)."""


class NumericError(HyperstabError):
    """An iterative numerical procedure failed to converge."""


class BudgetError(HyperstabError):
    """The requested computation exceeds the default resource budget and
    needs an explicit opt-in."""
