"""Errors shared across experiment modules."""


class BudgetExceededError(RuntimeError):
    """An exhaustive computation would exceed its evaluation budget."""


class DivergenceError(ValueError):
    """A series expansion was requested outside its convergence region."""
