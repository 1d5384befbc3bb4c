"""Variable-step three-step BDF integration of the Allen-Cahn equation.

Subpackages: time grids, kernel weights and their matrix forms, step-ratio
positivity certification, spectral collocation operators, the implicit
solver, and a command-line study harness.
"""

from .allen_cahn import (
    NewtonDivergenceError,
    RunResult,
    SingularJacobianError,
    SolverConfig,
    StepDiagnostics,
    check_energy_condition,
    check_solvability,
    consistency_probe,
    exact_solution,
    forcing,
    run,
    stability_probe,
    step,
)
from .bdf_kernels import (
    BdfCoefficients,
    KernelMatrices,
    apply_D3,
    assemble_B,
    bdf_coefficients,
    doc_kernels,
)
from .ratio_analysis import (
    CONSTANTS,
    AnalysisConstants,
    EigenConvergenceError,
    PowerIterationError,
    SylvesterTrace,
    certify_positive_definite,
    generating_function,
    lemma_functions,
    min_symmetric_eigenvalue,
    spectral_norm,
    sweep_lemma_bounds,
    sylvester_trace_A,
    sylvester_trace_A_from_ratios,
    sylvester_trace_shifted,
)
from .spectral import (
    FieldState,
    SpectralOperator,
    chebyshev_operator,
    energy,
    fourier_operator,
    l2_norm,
)
from .time_grid import (
    RatioReport,
    TimeGrid,
    build_alternating,
    build_from_ratios,
    build_from_steps,
    build_random,
    build_uniform,
    load_grid,
    random_bounded_grid,
    save_grid,
    validate_ratios,
)

__version__ = "0.1.0"
