"""Pulse-protected dissipative entanglement preparation toolkit."""

__version__ = "0.1.0"

from .liouville import (  # noqa: F401
    ConvergenceError,
    DensityMatrix,
    DimensionMismatchError,
    HilbertSpec,
    LindbladChannel,
    PropagationError,
    Superoperator,
    lindblad_generator,
    magnus_convergence_bound,
    poisson_bracket,
    propagate_piecewise,
    steady_state_by_evolution,
    trace_distance,
)
from .magnus import (  # noqa: F401
    MagnusCoefficients,
    PiecewisePolynomial,
    coefficients,
    coefficients_scaled,
    leading_generator,
    magnus_terms,
)
from .pulses import (  # noqa: F401
    PulseSequence,
    Schedule,
    cdd_unit,
    cpmg_unit,
    flatten,
    no_pulse_unit,
    random_schedule,
    repeat,
    sequence_from_tag,
    toggling_sign,
    udd_unit,
)
