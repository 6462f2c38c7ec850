"""
Exception hierarchy; the CLI maps DataError to exit code 2 and SolverError to exit code 3
"""


class ContextRobustError(Exception):
    """Base class for all package errors"""


class DataError(ContextRobustError, ValueError):
    """Invalid input data, configuration, or argument"""


class SolverError(ContextRobustError, RuntimeError):
    """A numerical routine failed"""


class DegenerateProfileError(SolverError):
    """Excess profile is constant; the multiplier equation has no finite root"""


class RootBracketError(SolverError):
    """Could not bracket the root of the multiplier equation"""
