"""Distributed Nash equilibrium seeking for constrained aggregative games.

Projected gradient play coupled with dynamic average consensus over
jointly connected, weight-balanced switching digraphs, plus a centralized
equilibrium oracle and run diagnostics.
"""

from aggnash.errors import (
    ConfigError,
    ContractError,
    FeasibilityError,
    InsufficientDataError,
    NonConvergenceError,
)
from aggnash.sets import (
    Ball,
    Box,
    HalfspaceIntersection,
    Product,
    Simplex,
    WholeSpace,
    contains,
    project,
)
from aggnash.game import (
    AffineAggregate,
    AggregativeGame,
    GameConstants,
    IdentityAggregate,
    QuadraticCost,
    aggregate,
    cournot_game,
    estimate_constants,
    extended_pseudo_gradient,
    linear_operator,
    partial_gradient,
    pseudo_gradient,
    quadratic_game,
)
from aggnash.network import (
    SwitchingSchedule,
    WeightedDigraph,
    graph_at,
    is_connected,
    is_weight_balanced,
    laplacian,
    union_graph,
    verify_assumption4,
)
from aggnash.equilibrium import (
    NESolveConfig,
    StepBounds,
    equilibrium_targets,
    solve_ne,
    step_bounds,
    verify_vi,
)
from aggnash.dynamics import (
    AlgorithmParams,
    IntegratorConfig,
    SimState,
    Trajectory,
    default_init,
    g0,
    rhs,
    simulate,
)
from aggnash.diagnostics import (
    ErrorCoordinates,
    OrthonormalBasis,
    Report,
    build_basis,
    error_coordinates,
    make_report,
    rate_fit,
)

__version__ = "0.1.0"
