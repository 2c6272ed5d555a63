"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input object violates a structural invariant (bad ids, negative
    demand, dimension mismatch, ...)."""


class ParseError(ValueError):
    """A file could not be parsed; the message names the offending field
    or line."""


class InfeasibleError(RuntimeError):
    """The problem admits no solution as posed (disconnected network pairs,
    single-zone budget too small for any pair, ...)."""


class SizeGuardError(RuntimeError):
    """A brute-force oracle was asked to enumerate beyond its hard size
    limit.  Raised before any enumeration starts."""


class SolverError(RuntimeError):
    """The LP/MIP layer failed in a way that cannot be expressed as a
    regular solution status."""
