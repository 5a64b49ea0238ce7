"""Simulated users, closed-loop experiments, and parameter sweeps.

A simulated user re-plans toward a hidden true goal every turn in a solo
projection of the world (the other hand's held blocks are simply
unavailable).  The adversarial "confuser" policy first plays optimally
toward a decoy word before switching to the true goal, which is what drives
the agent into the held-block failure the noop fallback cannot recover from.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import ValidationError
from .strips import Atom, GroundAction, Problem, applicable, restrict_to_actor, without_turn_taking
from .planner import SearchBudget, plan
from .session import Session, SessionConfig

POLICIES = ("optimal", "noisy", "confuser")

SWEEP_COLUMNS = (
    "tau",
    "headStart",
    "beta",
    "policy",
    "goal",
    "seed",
    "reached",
    "userActions",
    "agentActions",
    "mismatches",
    "conflictFallbacks",
    "recognitionCalls",
)


@dataclass(frozen=True)
class SimulatedUser:
    true_goal: str
    policy: str = "optimal"
    epsilon: float = 0.0
    seed: int = 0
    decoy_turns: int = 3

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValidationError(f"unknown user policy {self.policy!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError("epsilon must be in [0, 1]")


@dataclass
class SimulationResult:
    reached: bool
    turns: int
    user_actions: int  # substantive (non-pass) user actions
    agent_actions: int
    user_noops: int
    agent_noops: int
    mismatches: int
    conflict_fallbacks: int
    recognition_calls: int
    holding_flags: int  # turns where the user needed a block frozen in the agent's hand
    posterior_history: list = field(default_factory=list)
    satisfied: tuple = ()

    def as_row(self, config: SessionConfig, user: SimulatedUser) -> dict:
        return {
            "tau": config.tau,
            "headStart": config.head_start,
            "beta": config.beta,
            "policy": user.policy,
            "goal": user.true_goal,
            "seed": user.seed,
            "reached": "true" if self.reached else "false",
            "userActions": self.user_actions,
            "agentActions": self.agent_actions,
            "mismatches": self.mismatches,
            "conflictFallbacks": self.conflict_fallbacks,
            "recognitionCalls": self.recognition_calls,
        }


class UserDriver:
    """Chooses the simulated user's next world action."""

    def __init__(self, session: Session, user: SimulatedUser):
        self.session = session
        self.user = user
        self.rng = random.Random(user.seed)
        cfg = session.config
        self.solo = restrict_to_actor(without_turn_taking(cfg.problem), cfg.user)
        self.goals = {h.label: h.goal for h in cfg.hypotheses}
        self.true_goal = self.goals[user.true_goal]
        self.noop = cfg.problem.action(f"noop({cfg.user})")
        decoys = sorted(set(self.goals) - {user.true_goal})
        self.decoy_goal = self.goals[self.rng.choice(decoys)] if decoys else None
        self.turns_played = 0
        self.budget = SearchBudget(50_000, 10_000.0)

    def _solo_state(self) -> frozenset:
        return frozenset(a for a in self.session.world if a.predicate != "turn")

    def _freed_state(self) -> frozenset:
        """The solo state with the agent's held blocks back on the table."""
        agent = self.session.config.agent
        state = set(self._solo_state())
        for atom in list(state):
            if atom.predicate == "holding" and atom.args[0] == agent:
                state.discard(atom)
                state.add(Atom("on-table", (atom.args[1],)))
                state.add(Atom("clear", (atom.args[1],)))
        return frozenset(state)

    def _solo_plan(self, goal: frozenset, state: Optional[frozenset] = None):
        init = state if state is not None else self._solo_state()
        return plan(self.solo.with_init(init).with_goal(goal), "optimal", self.budget)

    def _world_action(self, solo_action: GroundAction) -> GroundAction:
        return self.session.config.problem.action(solo_action.uid)

    def _optimal_step(self, goal: frozenset) -> Optional[GroundAction]:
        outcome = self._solo_plan(goal)
        if outcome.solved and outcome.plan.steps:
            return self._world_action(outcome.plan.steps[0])
        if outcome.status != "unsolvable":
            return None
        # blocked by a block in the agent's hand: keep making progress as if
        # the agent will hand it back, pausing only when truly stuck
        freed = self._solo_plan(goal, self._freed_state())
        if freed.solved and freed.plan.steps:
            step = freed.plan.steps[0]
            if applicable(self._solo_state(), step):
                return self._world_action(step)
        return None

    def substantive_legal(self) -> list[GroundAction]:
        return [a for a in self.session.legal_actions() if a.base_name != "noop"]

    def choose(self) -> GroundAction:
        self.turns_played += 1
        if self.user.policy == "noisy" and self.rng.random() < self.user.epsilon:
            options = self.substantive_legal()
            if options:
                return self.rng.choice(sorted(options, key=lambda a: a.uid))
        if self.user.policy == "confuser" and self.turns_played <= self.user.decoy_turns:
            if self.decoy_goal is not None:
                step = self._optimal_step(self.decoy_goal)
                if step is not None:
                    return step
        step = self._optimal_step(self.true_goal)
        return step if step is not None else self.noop

    def blocked_by_agent_hand(self) -> bool:
        """The held-block failure: the agent is idling (its last move was a
        pass) while holding a block without which the user's goal is
        unreachable.  Mid-plan holding does not count; the agent is about to
        place that block."""
        session = self.session
        if not session.observations or session.observations[-1].base_name != "noop":
            return False
        if session.observations[-1].actor != session.config.agent:
            return False
        agent = session.config.agent
        held = [a.args[1] for a in session.world if a.predicate == "holding" and a.args[0] == agent]
        if not held:
            return False
        if self._solo_plan(self.true_goal).status != "unsolvable":
            return False
        freed = set(self._solo_state())
        for block in held:
            freed.discard(Atom("holding", (agent, block)))
            freed.add(Atom("on-table", (block,)))
            freed.add(Atom("clear", (block,)))
        restored = plan(
            self.solo.with_init(frozenset(freed)).with_goal(self.true_goal),
            "optimal",
            self.budget,
        )
        return restored.solved


def run_simulation(
    config: SessionConfig, user: SimulatedUser, max_turns: int = 60
) -> tuple[SimulationResult, Session]:
    """Drive one closed-loop game; deterministic given the config and seeds."""
    if max_turns <= 0:
        raise ValidationError("max_turns must be positive")
    session = Session(config)
    driver = UserDriver(session, user)
    holding_flags = 0
    blocked_streak = 0
    user_actions = agent_actions = user_noops = agent_noops = 0
    posterior_history = [session.posterior.as_dict()]

    while not session.terminal and session.turn_counter < max_turns:
        if driver.blocked_by_agent_hand():
            blocked_streak += 1
            if blocked_streak >= 2:  # persistent freeze, not a one-turn wait
                holding_flags += 1
        else:
            blocked_streak = 0
        action = driver.choose()
        session.submit_user_action(action)
        if action.base_name == "noop":
            user_noops += 1
        else:
            user_actions += 1
        if session.terminal or session.turn_counter >= max_turns:
            break
        agent_action, _ = session.agent_step()
        if agent_action.base_name == "noop":
            agent_noops += 1
        else:
            agent_actions += 1
        posterior_history.append(session.posterior.as_dict())

    reached = user.true_goal in session.satisfied_goals()
    result = SimulationResult(
        reached=reached,
        turns=session.turn_counter,
        user_actions=user_actions,
        agent_actions=agent_actions,
        user_noops=user_noops,
        agent_noops=agent_noops,
        mismatches=session.counters.mismatches,
        conflict_fallbacks=session.counters.conflict_fallbacks,
        recognition_calls=session.counters.recognition_calls,
        holding_flags=holding_flags,
        posterior_history=posterior_history,
        satisfied=session.satisfied_goals(),
    )
    return result, session


def sweep_rows(
    taus: Sequence[float],
    head_starts: Sequence[int],
    betas: Sequence[float],
    policies: Sequence[str],
    goals: Sequence[str],
    repetitions: int = 1,
    base_seed: int = 0,
    fallback: str = "noop",
    epsilon: float = 0.25,
    max_turns: int = 60,
    config_factory=None,
) -> list[dict]:
    """One row per grid cell and repetition, in deterministic order."""
    if not (taus and head_starts and betas and policies and goals):
        raise ValidationError("sweep grid must be nonempty")
    factory = config_factory or (lambda **kw: SessionConfig.blockwords(**kw))
    rows = []
    index = 0
    for rep in range(repetitions):
        for tau in taus:
            for k in head_starts:
                for beta in betas:
                    for policy in policies:
                        for goal in goals:
                            seed = base_seed + index
                            index += 1
                            config = factory(
                                tau=tau,
                                head_start=k,
                                beta=beta,
                                fallback=fallback,
                                seed=seed,
                                true_goal=goal,
                            )
                            user = SimulatedUser(
                                true_goal=goal, policy=policy, epsilon=epsilon, seed=seed
                            )
                            result, _ = run_simulation(config, user, max_turns)
                            rows.append(result.as_row(config, user))
    return rows


def write_sweep_csv(rows: Iterable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(SWEEP_COLUMNS), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in SWEEP_COLUMNS})
