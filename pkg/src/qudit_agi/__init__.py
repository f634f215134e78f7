"""Average gate infidelity of single-qudit gates under Lindblad noise.

Exact channels come from exponentiating the Liouvillian; the perturbative
series in the coupling ``gamma_t`` is available to any order. Helpers
cover the strong-coupling plateaus, Haar ensembles and curve fitting.

>>> from qudit_agi import GateSpec, NoiseSpec, agi_exact, agi_first_order
>>> gate, noise = GateSpec("qft", 3), NoiseSpec("jz", 3)
>>> round(agi_first_order(noise, 1e-3), 12)
0.0005
"""

__version__ = "0.1.0"

from .asymptotics import (  # noqa: E402
    AgiCurve,
    CurveShape,
    FitResult,
    Model,
    classify_curve,
    default_grid,
    fit_model,
    log_grid,
    plateau_bounds,
    saturation_point,
    strong_coupling_limit,
    sweep_agi,
)
from .channel import (  # noqa: E402
    QuantumChannel,
    agf_exact,
    agf_montecarlo,
    agi_exact,
    evolve_diagnostics,
    propagate,
)
from .errors import (  # noqa: E402
    BracketError,
    ConvergenceError,
    FitError,
    NumericRangeError,
    QuditAgiError,
    TruncationError,
)
from .haar_stats import (  # noqa: E402
    PlateauDistribution,
    plateau_distribution,
    sample_cue_spectrum,
    unfold_spacings,
    wigner_surmise,
)
from .perturbation import (  # noqa: E402
    ConvergenceReport,
    PerturbationSeries,
    agi_first_order,
    agi_second_order,
    agi_second_order_operator_form,
    agi_series,
    convergence_cutoff,
    gate_independent_agi,
    iterated_commutator,
    trace_lindblad_power,
)
from .qudit import (  # noqa: E402
    GateKind,
    GateSpec,
    NoiseKind,
    NoiseSpec,
    build_collapse,
    build_gate,
    haar_random_unitary,
)
