"""Balanced quasi-monotone weakly coupled elliptic systems on grids.

Structural checks, monotone finite differences, barrier construction and a
monotone sandwich solver for systems whose unknowns split into two
internally cooperative, mutually competitive groups.
"""

__version__ = "0.1.0"

from .operators import (  # noqa: E402
    OperatorSpec,
    Partition,
    StructuralForm,
    affine,
    constant,
    evaluate,
    evaluate_structural,
    gaussian_bump,
    make_competitive,
    make_diagonal_linear,
    product_of_sines,
)
from .grid import (  # noqa: E402
    DiscreteSystem,
    Grid,
    ResidualField,
    VectorGridFunction,
    build_grid,
    discretize,
    residual,
)
from .viscosity import (  # noqa: E402
    classify,
    compare_orderings,
    family_inf_sup,
    lattice_combine_sub_super,
    lattice_combine_super_sub,
)
from .barriers import (  # noqa: E402
    BarrierPair,
    build_barriers,
    solve_scalar_linear,
    solve_scalar_semilinear,
)
from .perron import (  # noqa: E402
    SolveConfig,
    SolveReport,
    perron_solve,
    perron_solve_dual,
    pseudo_time_oracle,
)
from .structure import SamplerConfig, CheckReport  # noqa: E402

__all__ = [
    "__version__",
    "# noqa: E402",
    "OperatorSpec",
    "Partition",
    "StructuralForm",
    "affine",
    "constant",
    "evaluate",
    "evaluate_structural",
    "gaussian_bump",
    "make_competitive",
    "make_diagonal_linear",
    "product_of_sines",
    "# noqa: E402",
    "DiscreteSystem",
    "Grid",
    "ResidualField",
    "VectorGridFunction",
    "build_grid",
    "discretize",
    "residual",
    "# noqa: E402",
    "classify",
    "compare_orderings",
    "family_inf_sup",
    "lattice_combine_sub_super",
    "lattice_combine_super_sub",
    "# noqa: E402",
    "BarrierPair",
    "build_barriers",
    "solve_scalar_linear",
    "solve_scalar_semilinear",
    "# noqa: E402",
    "SolveConfig",
    "SolveReport",
    "perron_solve",
    "perron_solve_dual",
    "pseudo_time_oracle",
    "SamplerConfig",
    "CheckReport",
]
