"""Turning a goal posterior into assistive behavior.

The shared features ("necessities") of the likely goals are the atoms whose
posterior-weighted frequency meets the threshold tau; they form the agent's
intermediate goal.  A turn-taking joint plan then assigns actions to both
actors until that goal holds.  When the intermediate goal is contradictory
or no plan exists, a configurable fallback keeps the agent responsive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import ModelError, ValidationError
from .strips import Atom, GroundAction, Problem, goal_conflicts, satisfies, turn_atom
from .planner import Plan, PlanOutcome, SearchBudget, plan
from .recognition import GoalPosterior

FALLBACK_NOOP = "noop"
FALLBACK_DEFAULT_GOAL = "default-goal"

_SCALE = 10**12  # posterior values are rounded to 1e-12 before exact summation


@dataclass(frozen=True)
class ResponderConfig:
    tau: float = 0.5
    fallback: str = FALLBACK_NOOP
    agent: str = "agent"

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError(f"tau must be in [0, 1], got {self.tau}")
        if self.fallback not in (FALLBACK_NOOP, FALLBACK_DEFAULT_GOAL):
            raise ValidationError(f"unknown fallback policy {self.fallback!r}")


@dataclass(frozen=True)
class IntermediateGoal:
    atoms: frozenset
    unsatisfied: frozenset  # selected atoms not yet true in the current state
    weights: dict  # Atom -> float weight (for every candidate feature)
    conflicts: tuple  # pairs of mutex-conflicting atoms; empty means verdict ok
    tau: float

    @property
    def ok(self) -> bool:
        return not self.conflicts

    @property
    def satisfied_already(self) -> bool:
        return not self.unsatisfied

    def as_dict(self) -> dict:
        return {
            "tau": self.tau,
            "atoms": sorted(str(a) for a in self.atoms),
            "unsatisfied": sorted(str(a) for a in self.unsatisfied),
            "weights": {str(a): w for a, w in sorted(self.weights.items(), key=lambda kv: str(kv[0]))},
            "conflicts": [[str(a), str(b)] for a, b in self.conflicts],
            "satisfiedAlready": self.satisfied_already,
        }


@dataclass(frozen=True)
class JointPlan:
    steps: tuple[GroundAction, ...]
    cost: int
    goal: frozenset

    def __len__(self) -> int:
        return len(self.steps)

    def actors(self) -> tuple[str, ...]:
        return tuple(s.actor for s in self.steps)

    def as_dict(self) -> dict:
        return {
            "cost": self.cost,
            "steps": [{"actor": s.actor, "action": s.uid} for s in self.steps],
            "goal": sorted(str(a) for a in self.goal),
        }


def _exact(p: float) -> Fraction:
    return Fraction(round(p * _SCALE), _SCALE)


def _exact_weights(hypotheses: Sequence, posterior: GoalPosterior) -> dict:
    weights: dict[Atom, Fraction] = {}
    for hyp in hypotheses:
        p = _exact(posterior.prob(hyp.label))
        if p <= 0:
            continue
        for atom in hyp.goal:
            weights[atom] = weights.get(atom, Fraction(0)) + p
    return weights


def feature_weights(hypotheses: Sequence, posterior: GoalPosterior) -> dict:
    """weight(f) = sum of posterior probability over goals containing f."""
    return {atom: float(w) for atom, w in _exact_weights(hypotheses, posterior).items()}


def intermediate_goal(
    hypotheses: Sequence,
    posterior: GoalPosterior,
    config: ResponderConfig,
    state: frozenset,
    mutex_groups: Iterable = (),
) -> IntermediateGoal:
    """Atoms whose weight reaches tau, with a mutex-consistency verdict.

    Atoms already true still count (they may need protecting), but when every
    selected atom holds in `state` the satisfied_already flag short-circuits
    planning: the intermediate goal is to change nothing.
    """
    exact = _exact_weights(hypotheses, posterior)
    tau = _exact(config.tau)
    selected = frozenset(atom for atom, w in exact.items() if w >= tau)
    conflicts = tuple(goal_conflicts(selected, mutex_groups))
    return IntermediateGoal(
        atoms=selected,
        unsatisfied=selected - state,
        weights={atom: float(w) for atom, w in exact.items()},
        conflicts=conflicts,
        tau=config.tau,
    )


def joint_plan(
    problem: Problem,
    state: frozenset,
    igoal: IntermediateGoal,
    budget: Optional[SearchBudget] = None,
    user: Optional[str] = None,
) -> PlanOutcome:
    """Optimal plan toward the intermediate goal in the turn-taking model.

    `state` must carry the turn atom of the actor to move; steps come out
    tagged with their actor and strictly alternating.  Among minimum-cost
    plans, ones that require the fewest substantive user steps win, so the
    agent never leans on user work it could do itself at equal cost.

    A conflicting intermediate goal comes back Unsolvable immediately (the
    planner's mutex pre-check); the caller's fallback takes over.
    """
    if igoal.satisfied_already:
        raise ModelError("joint_plan requires an unsatisfied intermediate goal")
    if not any(a.predicate == "turn" for a in state):
        raise ModelError("joint_plan needs a turn atom in the current state")
    return plan(
        problem.with_init(state).with_goal(igoal.atoms),
        "optimal",
        budget,
        defer_actor=user,
    )


def as_joint(outcome: PlanOutcome, goal: frozenset) -> Optional[JointPlan]:
    if not outcome.solved:
        return None
    return JointPlan(outcome.plan.steps, outcome.plan.cost, goal)


def next_actions(jplan: JointPlan, agent: str, user: str) -> tuple:
    """(first agent-tagged step, first user-tagged step after it or None)."""
    if not jplan.steps:
        raise ModelError("next_actions requires a nonempty plan")
    agent_idx = None
    for i, step in enumerate(jplan.steps):
        if step.actor == agent:
            agent_idx = i
            break
    if agent_idx is None:
        raise ModelError("joint plan contains no agent step")
    predicted = None
    for step in jplan.steps[agent_idx + 1:]:
        if step.actor == user:
            predicted = step
            break
    return jplan.steps[agent_idx], predicted


def _agent_noop(problem: Problem, agent: str) -> GroundAction:
    return problem.action(f"noop({agent})")


def fallback_action(
    problem: Problem,
    state: frozenset,
    config: ResponderConfig,
    budget: Optional[SearchBudget] = None,
) -> GroundAction:
    """Behavior when no intermediate goal can be pursued.

    Policy "noop" passes the turn.  Policy "default-goal" plans for an empty
    agent hand (putting down any held block) and falls back to a pass once
    that already holds.
    """
    noop = _agent_noop(problem, config.agent)
    if config.fallback == FALLBACK_NOOP:
        return noop
    default_goal = frozenset({Atom("handempty", (config.agent,))})
    if satisfies(state, default_goal):
        return noop
    outcome = plan(problem.with_init(state).with_goal(default_goal), "optimal", budget)
    if outcome.solved and outcome.plan.steps:
        first = outcome.plan.steps[0]
        if first.actor == config.agent:
            return first
    return noop
