"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid user input: unknown ids, out-of-range scores, malformed files."""


class ResourceLimitError(RuntimeError):
    """A search or enumeration exceeded its configured budget."""


class SolverBudgetExceeded(ResourceLimitError):
    """Branch-and-bound ran out of node expansions before proving optimality."""
