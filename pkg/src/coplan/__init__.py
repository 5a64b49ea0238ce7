"""Assistive turn-taking planner for Block Words.

The engine watches a user act in a STRIPS world, infers a posterior over
their candidate goals by comparing plan costs that comply with versus avoid
the observed actions, distills the shared goal features into an
intermediate goal, plans a turn-taking joint response, and monitors whether
the user keeps behaving as predicted.
"""

from .errors import (
    BudgetExhaustedError,
    CoplanError,
    DigestMismatchError,
    ModelError,
    ParseError,
    PreconditionError,
    TurnError,
    ValidationError,
)
from .strips import (
    Atom,
    GroundAction,
    MutexGroup,
    Problem,
    applicable,
    apply,
    atoms,
    goal_conflicts,
    restrict_to_actor,
    satisfies,
    state_mutex_violations,
    without_turn_taking,
)
from .modelio import (
    BlockWordsSpec,
    Domain,
    LogRecord,
    ProblemDef,
    blockwords_domain,
    figure_layout_spec,
    ground,
    make_blockwords,
    parse_domain,
    parse_problem,
    print_domain,
    print_problem,
    read_log,
    state_digest,
    word_goal,
    write_log,
)
from .planner import (
    Plan,
    PlanOutcome,
    SearchBudget,
    ValidationResult,
    heuristic,
    plan,
    validate_plan,
    wcd,
)
from .recognition import (
    GoalHypothesis,
    GoalPosterior,
    RecognitionConfig,
    compile_avoid,
    compile_comply,
    compile_observations,
    goal_likelihood,
    recognize,
    uniform_hypotheses,
)
from .responder import (
    IntermediateGoal,
    JointPlan,
    ResponderConfig,
    fallback_action,
    feature_weights,
    intermediate_goal,
    joint_plan,
    next_actions,
)
from .session import MonitorVerdict, Session, SessionConfig, replay_log
from .sim import SimulatedUser, SimulationResult, run_simulation, sweep_rows, write_sweep_csv

__version__ = "0.1.0"
