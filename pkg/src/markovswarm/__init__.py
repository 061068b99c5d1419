"""Markov-kernel control of swarm task allocation.

Central control synthesises a broadcast kernel whose stationary
distribution is the target; distributed control perturbs it per epoch with
language-measure feedback so agents idle more near the target.
"""

from .central import apply_gain, gain_from_distributions, synthesize_central
from .core import (
    SwarmState,
    TaskGraph,
    build_moore_grid,
    check_sparsity_match,
    is_irreducible,
    normalize_adjacency,
    stationary_distribution,
)
from .errors import (
    ConfigError,
    DegenerateDimension,
    GainOutOfRange,
    NonConvergence,
    SingularSystem,
    SparsityViolation,
    SwarmError,
    TraceTooShort,
)
from .measure import (
    BetaSchedule,
    FeedbackParams,
    beta_at,
    cesaro_measure,
    feedback_kernel,
    feedback_step,
    measure_direct,
    measure_iterative,
    sigmoid_activity,
)
from .simulator import (
    ScenarioConfig,
    SimulationTrace,
    activity_level,
    detect_oscillation,
    lyapunov_diagnostics,
    run_scenario,
    step_agents,
    step_meanfield,
)

__version__ = "0.1.0"
