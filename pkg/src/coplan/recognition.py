"""Goal recognition as planning.

For every goal hypothesis the recognizer solves two planning problems: the
cheapest plan that executes the observed actions in order (as an embedded
subsequence), and the cheapest plan that does not.  The cost gap feeds a
sigmoid likelihood; likelihoods times priors normalize into the posterior.

The observation compilation tracks compliance with a chain of level atoms
complied-0 .. complied-n, exactly one of which holds at a time.  Each
observed step gets a marked copy of its action that advances the level, and
every other execution of an observed action is rerouted through per-level
free copies.  Executing the i-th observed action while at level i-1 therefore
always advances the level (the greedy-matching semantics of subsequence
containment), which is what makes the avoidance side sound: a "not-complied"
atom, deleted only by the final marked step, stays true exactly on plans
that do not contain the full observation sequence.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import ModelError, ValidationError
from .strips import COST_UNIT, Atom, GroundAction, Problem, apply
from .planner import Plan, PlanOutcome, SearchBudget, plan

INF = math.inf


def level_atom(i: int) -> Atom:
    return Atom(f"complied-{i}")

NOT_COMPLIED = Atom("not-complied")
IMPOSSIBLE = Atom("impossible")


@dataclass(frozen=True)
class GoalHypothesis:
    label: str
    goal: frozenset
    prior: float

    def __post_init__(self):
        if not 0.0 < self.prior <= 1.0:
            raise ValidationError(f"prior for {self.label!r} must be in (0, 1]")


def uniform_hypotheses(labeled_goals: Iterable) -> tuple:
    pairs = list(labeled_goals)
    if not pairs:
        raise ValidationError("at least one goal hypothesis is required")
    prior = 1.0 / len(pairs)
    return tuple(GoalHypothesis(label, frozenset(goal), prior) for label, goal in pairs)


@dataclass(frozen=True)
class RecognitionConfig:
    beta: float = 1.0
    mode: str = "optimal"
    budget: SearchBudget = field(default_factory=SearchBudget)
    workers: int = 1

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationError("beta must be positive")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass(frozen=True)
class GoalDiagnostic:
    label: str
    c_comply: Optional[float]  # cost units; math.inf for unachievable; None when skipped
    c_avoid: Optional[float]
    delta: Optional[float]
    likelihood: Optional[float]
    comply_status: str = ""
    avoid_status: str = ""

    def as_dict(self) -> dict:
        def enc(v):
            if v is None:
                return None
            if v is INF:
                return "inf"
            return v

        return {
            "label": self.label,
            "cComply": enc(self.c_comply),
            "cAvoid": enc(self.c_avoid),
            "delta": enc(self.delta),
            "likelihood": self.likelihood,
            "complyStatus": self.comply_status,
            "avoidStatus": self.avoid_status,
        }


@dataclass(frozen=True)
class GoalPosterior:
    labels: tuple[str, ...]
    probabilities: tuple[float, ...]
    diagnostics: tuple[GoalDiagnostic, ...]
    feasible: bool = True
    degraded: bool = False  # some planner call hit its budget; inf was assumed

    def prob(self, label: str) -> float:
        return self.probabilities[self.labels.index(label)]

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.probabilities))

    def diagnostics_dict(self) -> dict:
        return {d.label: d.as_dict() for d in self.diagnostics}


@dataclass(frozen=True)
class CompiledObservations:
    problem: Problem
    length: int

    @property
    def comply_atom(self) -> Atom:
        return level_atom(self.length)


def _validate_observations(problem: Problem, obs: Sequence) -> None:
    """Observations must be actions of the model.

    They need not replay verbatim from the initial state: missing actions
    between observations are assumed, so a sequence only has to be
    embeddable.  Histories of real sessions always are; for anything else
    the compiled problems simply come out unsolvable.
    """
    for i, action in enumerate(obs):
        known = problem.action_index.get(action.uid)
        if known is None or known != action:
            raise ModelError(f"observation {i + 1} ({action.uid}) is not an action of the model")


def compile_observations(problem: Problem, obs: Sequence) -> CompiledObservations:
    """Augment the model with compliance levels for the observed sequence."""
    _validate_observations(problem, obs)
    n = len(obs)
    if n == 0:
        return CompiledObservations(problem, 0)

    positions: dict[str, list[int]] = {}
    for i, action in enumerate(obs, start=1):
        positions.setdefault(action.uid, []).append(i)

    actions = []
    for action in problem.actions:
        pos = positions.get(action.uid)
        if not pos:
            actions.append(action)
            continue
        for i in pos:
            dele = action.dele | {level_atom(i - 1)}
            if i == n:
                dele = dele | {NOT_COMPLIED}
            actions.append(
                dataclasses.replace(
                    action,
                    name=f"{action.name}/obs{i}",
                    pre=action.pre | {level_atom(i - 1)},
                    add=action.add | {level_atom(i)},
                    dele=dele,
                )
            )
        for j in range(n + 1):
            if j + 1 in pos:
                continue
            actions.append(
                dataclasses.replace(
                    action,
                    name=f"{action.name}/lvl{j}",
                    pre=action.pre | {level_atom(j)},
                )
            )

    compiled = dataclasses.replace(
        problem,
        name=f"{problem.name}-obs{n}",
        actions=tuple(actions),
        init=problem.init | {level_atom(0), NOT_COMPLIED},
    )
    return CompiledObservations(compiled, n)


def compile_comply(problem: Problem, goal: frozenset, obs: Sequence) -> Problem:
    """Problem whose optimal cost is the cheapest way to reach `goal` while
    executing `obs` in order (other actions may interleave)."""
    if not obs:
        return problem.with_goal(goal)
    co = compile_observations(problem, obs)
    return co.problem.with_goal(goal | {co.comply_atom})


def compile_avoid(problem: Problem, goal: frozenset, obs: Sequence) -> Problem:
    """Problem whose optimal cost is the cheapest way to reach `goal` without
    executing all of `obs` in order.  With no observations this is the
    unsatisfiable marker problem (avoiding the empty sequence is impossible)."""
    if not obs:
        return problem.with_goal(goal | {IMPOSSIBLE})
    co = compile_observations(problem, obs)
    return co.problem.with_goal(goal | {NOT_COMPLIED})


def goal_likelihood(c_comply: float, c_avoid: float, beta: float) -> float:
    """P(observations | goal) = 1 / (1 + exp(beta * (c_comply - c_avoid))).

    Costs are in action units.  An impossible avoidance means full
    likelihood; an impossible compliance means zero.
    """
    if beta <= 0:
        raise ValidationError("beta must be positive")
    if c_comply is INF and c_avoid is INF:
        raise ModelError("goal is infeasible: both compliance and avoidance are impossible")
    if c_avoid is INF:
        return 1.0
    if c_comply is INF:
        return 0.0
    x = beta * (c_comply - c_avoid)
    if x > 700.0:
        return 0.0
    if x < -700.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(x))


def _cost_of(outcome: PlanOutcome) -> tuple[float, str]:
    if outcome.solved:
        return outcome.plan.cost / COST_UNIT, "solved"
    if outcome.unsolvable:
        return INF, "unsolvable"
    return INF, "budget-exhausted"


def recognize(
    problem: Problem,
    hypotheses: Sequence,
    obs: Sequence,
    config: Optional[RecognitionConfig] = None,
) -> GoalPosterior:
    """Posterior over goal hypotheses given the observed action sequence.

    With no observations the posterior equals the prior and no planner runs.
    Goals whose compliance and avoidance are both impossible are excluded
    from normalization; if every goal is excluded the result is flagged
    infeasible and the caller must fall back.
    """
    config = config or RecognitionConfig()
    hyps = tuple(hypotheses)
    if not hyps:
        raise ValidationError("at least one goal hypothesis is required")
    total_prior = sum(h.prior for h in hyps)
    if abs(total_prior - 1.0) > 1e-9:
        raise ValidationError(f"priors must sum to 1 (got {total_prior})")
    labels = tuple(h.label for h in hyps)

    if not obs:
        diags = tuple(GoalDiagnostic(h.label, None, None, None, None) for h in hyps)
        return GoalPosterior(labels, tuple(h.prior for h in hyps), diags)

    co = compile_observations(problem, obs)
    comply_goal = lambda h: h.goal | {co.comply_atom}
    avoid_goal = lambda h: h.goal | {NOT_COMPLIED}

    def solve(goal: frozenset) -> PlanOutcome:
        return plan(co.problem.with_goal(goal), mode=config.mode, budget=config.budget)

    tasks = [comply_goal(h) for h in hyps] + [avoid_goal(h) for h in hyps]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(solve, tasks))
    else:
        outcomes = [solve(goal) for goal in tasks]

    degraded = False
    diags = []
    weights = []
    for i, h in enumerate(hyps):
        cc, cc_status = _cost_of(outcomes[i])
        ca, ca_status = _cost_of(outcomes[len(hyps) + i])
        degraded = degraded or "budget-exhausted" in (cc_status, ca_status)
        if cc is INF and ca is INF:
            diags.append(GoalDiagnostic(h.label, cc, ca, None, None, cc_status, ca_status))
            weights.append(0.0)
            continue
        lik = goal_likelihood(cc, ca, config.beta)
        delta = None if (cc is INF or ca is INF) else cc - ca
        diags.append(GoalDiagnostic(h.label, cc, ca, delta, lik, cc_status, ca_status))
        weights.append(h.prior * lik)

    z = sum(weights)
    if z <= 0.0:
        return GoalPosterior(labels, tuple(0.0 for _ in hyps), tuple(diags), feasible=False, degraded=degraded)
    probs = tuple(w / z for w in weights)
    return GoalPosterior(labels, probs, tuple(diags), feasible=True, degraded=degraded)
