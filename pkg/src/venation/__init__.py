"""Simulation of biological transport-network formation on the unit square.

Two coupled elliptic-parabolic systems share one discretization: a vector
conductivity model and a symmetric-tensor conductivity model, each driving a
variable-coefficient Neumann pressure problem and advanced by a symmetric-ADI
semi-implicit integrator.
"""

from .adi import (
    CState,
    MState,
    RunRecord,
    adi_step_c,
    adi_step_m,
    boundary_values_c,
    boundary_values_m,
    init_c_state,
    init_m_state,
    run_simulation,
    thomas_solve_batch,
)
from .dynamics import (
    ActivationFields,
    SystemParams,
    activation_terms,
    energy_tens,
    energy_vect,
    flux,
    metabolic_coeff_c,
    metabolic_coeff_m,
)
from .errors import (
    EllipticityError,
    NonFiniteError,
    NumericsError,
    PivotError,
    SingularCoefficientError,
    SolverConvergenceError,
)
from .experiments import (
    AccuracyRow,
    TestCase,
    diff_metric,
    difference_run,
    discrepancy_norm,
    initial_condition,
    lookup,
    matched_params,
    paired_run,
    richardson_study,
    test_catalog,
)
from .grid import (
    GridSpec,
    ScalarField,
    SymTensorField2,
    VectorField2,
    dx,
    dy,
    make_grid,
    rel_l2_error,
    restrict,
)
from .poisson import (
    PermeabilityField,
    PoissonOperator,
    PressureSolver,
    assemble,
    make_source,
    permeability_from_c,
    permeability_from_m,
    solve_pressure,
)

__version__ = "0.1.0"
