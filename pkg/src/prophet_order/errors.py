"""Exception types shared across the package."""


class ProphetOrderError(Exception):
    """Base class for all package errors."""


class NonInvertible(ProphetOrderError):
    """The max-CDF is flat at the requested level, so the threshold is set-valued."""


class DegenerateScheme(ProphetOrderError):
    """The survival function g(t) reached zero before t = 1."""


class BothSchemesFailed(ProphetOrderError):
    """Neither Scheme I nor Scheme II produced well-defined arrival laws."""


class BracketFailure(ProphetOrderError):
    """A root bracket could not be certified by a sign change."""


class CapExceeded(ProphetOrderError):
    """Algorithm enumeration would exceed the configured cap."""


class LpError(ProphetOrderError):
    """The linear program is infeasible or unbounded."""


class VerificationFailure(ProphetOrderError):
    """A numerical certificate failed to verify."""
