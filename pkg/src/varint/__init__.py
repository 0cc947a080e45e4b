"""Fixed and adaptive-step variational integrators for forced Lagrangian systems."""

from .errors import (
    ConfigError,
    GuardError,
    InvalidPairError,
    InvalidParameterError,
    MissingForceError,
    MissingOracleError,
    NonConvergenceError,
    SingularSystemError,
    SolverError,
    UnsupportedRegimeError,
    VIError,
)
from .model import (
    InitialCondition,
    SystemSpec,
    continuous_energy,
    damping_ratio,
    make_damped_oscillator,
    make_double_well,
    reference_double_well,
    reference_oscillator,
    reference_solution,
)
from .discrete import (
    DiscreteGradients,
    DiscretePair,
    discrete_energy,
    discrete_forces,
    discrete_gradients,
    discrete_lagrangian,
    discrete_momentum,
    discrete_powers,
    left_maps,
)
from .solve import (
    ResidualSystem,
    SolverReport,
    condition_number,
    jacobian_fd,
    least_squares_solve,
    newton_solve,
)
from .integrators import (
    ExtendedState,
    IntegratorConfig,
    StepRecord,
    TrajectoryLog,
    bootstrap,
    run,
    step_adaptive,
    step_fixed,
    step_least_squares,
)
from .diagnostics import (
    ConditionPoint,
    EnergySeries,
    condition_study,
    convergence_order,
    energy_report,
    step_history,
    trajectory_error,
)

__version__ = "0.1.0"
