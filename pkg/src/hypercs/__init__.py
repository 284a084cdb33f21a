"""Compressive-sensing recovery toolkit for hyperspectral image cubes.

Pipeline: sparsify each pixel's spectrum in the inverse-DFT domain, keep a
seeded random subset of the spectral samples, then recover every pixel with
one of five sparse solvers (fista, admm, gomp, biht, cosamp) and score the
result against the sparsified cube.
"""

from .cube import (
    CubeFormat,
    CubeFormatError,
    HsiCube,
    extract_pixel,
    generate_synthetic_cube,
    load_cube,
    save_cube,
)
from .kernels import argmax_k, gather_columns, least_squares, residual_delta, soft_threshold
from .metrics import (
    SummaryRow,
    UndefinedMetricError,
    convergence_ratio,
    export_false_color,
    psnr,
    read_report,
    summarize,
    write_report,
)
from .solvers import (
    CONVEX_SOLVERS,
    GREEDY_SOLVERS,
    SOLVERS,
    NumericalFailure,
    RecoveryStats,
    SolverConfig,
    SolverResult,
    StopDecision,
    admm,
    biht,
    cosamp,
    fista,
    gomp,
    lasso_objective,
    recover_cube,
    stop_check,
)
from .transform import (
    DftBasis,
    Dictionary,
    SelectionMask,
    SparsifyStats,
    build_dft_basis,
    build_dictionary,
    build_selection_mask,
    from_sparse_domain,
    lipschitz_constant,
    load_mask,
    measure,
    save_mask,
    sparsify,
    to_sparse_domain,
)

__version__ = "0.1.0"

__all__ = [
    "CONVEX_SOLVERS",
    "CubeFormat",
    "CubeFormatError",
    "DftBasis",
    "Dictionary",
    "GREEDY_SOLVERS",
    "HsiCube",
    "NumericalFailure",
    "RecoveryStats",
    "SOLVERS",
    "SelectionMask",
    "SolverConfig",
    "SolverResult",
    "SparsifyStats",
    "StopDecision",
    "SummaryRow",
    "UndefinedMetricError",
    "admm",
    "argmax_k",
    "biht",
    "build_dft_basis",
    "build_dictionary",
    "build_selection_mask",
    "convergence_ratio",
    "cosamp",
    "export_false_color",
    "extract_pixel",
    "fista",
    "from_sparse_domain",
    "gather_columns",
    "generate_synthetic_cube",
    "gomp",
    "lasso_objective",
    "least_squares",
    "lipschitz_constant",
    "load_cube",
    "load_mask",
    "measure",
    "psnr",
    "read_report",
    "recover_cube",
    "residual_delta",
    "save_cube",
    "save_mask",
    "soft_threshold",
    "sparsify",
    "stop_check",
    "summarize",
    "to_sparse_domain",
    "write_report",
]
