"""Speaker/listener role coordination for decentralized two-agent teams.

Library layout:

- numerics: pinned RNG, Gaussian sampling, bisection, small eigensolvers
- discrete_roles: exact speaker/listener policies on finite spaces
- linear_roles: role allocations, stability, rotation, and variance analysis
  for linear feedback teams
- potential_field: attractive/repulsive planner terms and the velocity law
- table_sim: the two-agent table-carrying game with implicit and explicit
  communication
- bench: seeded, paired Monte-Carlo experiment harness
- cli: `rolecomms` command-line entry point
"""

from .bench import (
    BenchmarkConfig,
    BenchmarkReport,
    Condition,
    compare_conditions,
    run_benchmark,
)
from .discrete_roles import (
    interdependence_demo,
    listener_policy_exact,
    listener_posterior,
    speaker_policy_exact,
)
from .linear_roles import (
    DynamicAlternating,
    SpeakerListener,
    SpeakerSpeaker,
    TeamLinearSystem,
    expected_kl,
    lqr_gain,
    noisy_listener_action,
    optimal_variances,
    role_gain,
    rotation_action,
    rotation_converges,
    stability_report,
)
from .numerics import Rng, Vec2, bisect, derive_seed, eig2x2, eig_general, gaussian
from .potential_field import (
    Attractor,
    FieldParams,
    Obstacle,
    agent_velocity,
    attractive_grad,
    repulsive_grad,
)
from .table_sim import (
    AgentBelief,
    CommStrategy,
    DynamicRoles,
    Environment,
    Explicit,
    KnownRadius,
    Limits,
    SimOutcome,
    StaticRoles,
    TableState,
    UnknownRadius,
    Workspace,
    build_message,
    corrupt,
    generate_environment,
    infer_obstacle,
    run_game,
    table_step,
)

__version__ = "0.1.0"
