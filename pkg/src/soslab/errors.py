"""Exception types and the shared enumeration budget."""

import os

DEFAULT_BUDGET = 10**7


class SoslabError(Exception):
    """Base class for package errors."""


class ValidationError(SoslabError, ValueError):
    """Malformed input: bad parameters, mismatched payloads, missing keys."""


class BudgetExceeded(SoslabError):
    """An exhaustive enumeration would exceed the configured budget."""


class NotPSDError(SoslabError, ValueError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class SolverError(SoslabError):
    """The SDP solver could not produce a usable answer."""


class InfeasibleError(SolverError):
    """Presolve or the iteration detected an infeasible problem."""


def enumeration_budget(default: int = DEFAULT_BUDGET) -> int:
    """Enumeration cap; the ``SOSLAB_BUDGET`` environment variable overrides it."""
    raw = os.environ.get("SOSLAB_BUDGET")
    if raw is None:
        return default
    try:
        return int(float(raw))
    except ValueError:
        raise ValidationError(f"SOSLAB_BUDGET must be a number, got {raw!r}") from None


def check_budget(size: float, what: str, budget: int | None = None) -> None:
    cap = enumeration_budget() if budget is None else budget
    if size > cap:
        raise BudgetExceeded(f"{what}: {size:.3g} states exceed budget {cap:.3g}")
