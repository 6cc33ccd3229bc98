"""Order-selection prophet inequalities: arrival-time schemes, their analysis,
simulation, the LP route from competitiveness to stochastic dominance, and the
prophet-secretary hardness computation."""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    FiniteSupport,
    Instance,
    PiecewiseLinearCdf,
    Power,
    TimeGrid,
    Uniform,
    level_functions,
    max_exceed_prob,
    pt_hard_instance,
    threshold_tau,
)
from .errors import (  # noqa: E402
    BothSchemesFailed,
    BracketFailure,
    CapExceeded,
    DegenerateScheme,
    LpError,
    NonInvertible,
    ProphetOrderError,
    VerificationFailure,
)
from .scheme import SchemeParams, build_two_scheme, h_fn  # noqa: E402
