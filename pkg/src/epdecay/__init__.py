"""epdecay: a decay-rate laboratory for the damped two-fluid Euler-Poisson system.

Pseudo-spectral nonlinear solver on a periodic box, exact linearized-mode
propagator with whole-space radial quadrature, the norm machinery the decay
analysis runs on (Lp, H^k, homogeneous Hdot^s, negative-index Besov), and
fitting/verdict tools that measure algebraic decay exponents and compare
them with the predicted rates.
"""

from .spectral import (
    Grid,
    RealField,
    SpectralField,
    FluidState,
    SpectralError,
    ChargeImbalanceError,
    to_spectral,
    to_real,
    derivative,
    gradient,
    divergence,
    laplacian,
    poisson_solve,
    dealias,
)
from .norms import (
    NormSpec,
    BesovPartition,
    DyadicBlock,
    BumpProfile,
    NormDomainError,
    lp_norm,
    hdot_norm,
    sobolev_norm,
    besov_norm,
    check_neg_sobolev_interpolation,
    check_besov_interpolation,
    besov_interpolation_bound,
    check_hls_embedding,
    gagliardo_nirenberg_ratio,
)
from .linear import (
    LinearModeError,
    ModeSystem,
    SpectralProfile,
    propagate_mode,
    mode_matrix_check,
    mode_energy,
    norm_evolution,
    predicted_exponent,
)
from .analysis import (
    NormSeries,
    DecayFit,
    TrustWindow,
    AnalysisConfig,
    Verdict,
    fit_decay,
    sliding_exponent,
    compare_to_prediction,
    negative_norm_monitor,
)
from .solver import (
    PressureLaw,
    SolverConfig,
    StateTangent,
    RunNormRequest,
    RunResult,
    SolverError,
    CflError,
    VacuumError,
    InstabilityError,
    rhs,
    step,
    run,
    make_initial,
    energy_inequality_report,
    save_checkpoint,
    load_checkpoint,
    named_stream,
)

__version__ = "0.1.0"
