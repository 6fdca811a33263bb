"""Adaptive proximal ADMM for linearly constrained, weakly convex,
block composite programs.

The package is organized bottom up:

* :mod:`blockadmm.blocks` — block vectors and block-column linear maps;
* :mod:`blockadmm.problem` — oracles, box domains, instances, Lagrangians;
* :mod:`blockadmm.certify` — independent stationarity certification;
* :mod:`blockadmm.subsolvers` — inexact solvers for block subproblems;
* :mod:`blockadmm.sweeps` — fixed and stepsize-adaptive Gauss-Seidel sweeps;
* :mod:`blockadmm.fixed_penalty` — constant-penalty driver with gated
  multiplier updates;
* :mod:`blockadmm.adaptive_penalty` — penalty-doubling outer driver and the
  damped-multiplier baseline;
* :mod:`blockadmm.bench` — benchmark families, runner, CSV and tables;
* :mod:`blockadmm.diagnostics` — runtime invariant monitoring.
"""

from .adaptive_penalty import (
    AadmmResult,
    BaselineConfig,
    BaselineResult,
    OuterCallRecord,
    adaptive_penalty_admm,
    damped_multiplier_admm,
    damped_pair_is_theoretical,
)
from .bench import (
    AlgorithmSpec,
    DqpSpec,
    QpbcSpec,
    RunRecord,
    default_algorithms,
    emit_csv,
    emit_table,
    gen_dqp,
    gen_qpbc,
    read_csv,
    run_experiment,
)
from .blocks import BlockLinearMap, BlockNorms, BlockSizes, BlockVector, block_norms
from .certify import (
    Certificate,
    StationarityReport,
    SubCertificate,
    check_rho_eta_stationary,
    check_tau_stationary,
    eps_subgradient_gap,
    relative_error_ok,
)
from .diagnostics import InvariantMonitor
from .exceptions import (
    BlockAdmmError,
    DegenerateOperatorError,
    InvalidCertificateError,
    MetadataIncompleteError,
    NonconvergenceError,
    NotStronglyConvexError,
    OutOfDomainError,
    ShapeError,
    StepsizeCollapseError,
)
from .fixed_penalty import (
    AdmmResult,
    StoppingRule,
    TheoryConstants,
    fixed_penalty_admm,
    potential_update,
    theory_constants,
)
from .problem import (
    Box,
    DenseQuadraticOracle,
    FunctionOracle,
    InstanceMetadata,
    ProblemInstance,
    ScaledBlock,
    SeparableQuadraticOracle,
    SmoothOracle,
    ToleranceConfig,
    augmented_lagrangian,
    derive_metadata,
    smooth_lagrangian,
)
from .serialization import (
    certificate_from_json,
    certificate_to_json,
    instance_from_json,
    instance_to_json,
    load_certificate,
    load_instance,
    save_certificate,
    save_instance,
)
from .subsolvers import (
    CompositeGradientConfig,
    SubproblemSpec,
    accelerated_gradient,
    composite_gradient,
    exact_separable_quadratic_box,
    global_separable_quadratic_box,
)
from .sweeps import (
    AcceptedStep,
    SweepResult,
    adaptive_block_prox_sweep,
    block_prox_sweep,
    residual_pair,
)

__version__ = "0.1.0"
