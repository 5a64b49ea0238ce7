"""The interaction loop: observe the user, infer goals, respond, and monitor.

A Session is a strictly serialized command processor over one game: the
user submits an action, the agent takes its turn, and so on.  The agent's
turn either reuses the active joint plan (when the user behaved as
predicted), or re-runs recognition and intermediate-goal synthesis to plan
afresh, falling back to a pass or to emptying its hand when no plan exists.
Every turn appends an observation (agent actions included) and a log record
whose digest makes the session replayable and tamper-evident.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .errors import (
    DigestMismatchError,
    ModelError,
    PreconditionError,
    TurnError,
    ValidationError,
)
from .strips import (
    Atom,
    GroundAction,
    Problem,
    applicable,
    apply,
    satisfies,
    turn_atom,
    without_turn_taking,
)
from .planner import SearchBudget, validate_plan
from .recognition import (
    GoalDiagnostic,
    GoalHypothesis,
    GoalPosterior,
    RecognitionConfig,
    recognize,
    uniform_hypotheses,
)
from .responder import (
    FALLBACK_DEFAULT_GOAL,
    FALLBACK_NOOP,
    IntermediateGoal,
    JointPlan,
    ResponderConfig,
    as_joint,
    fallback_action,
    intermediate_goal,
    joint_plan,
)
from . import modelio
from .modelio import BlockWordsSpec, LogRecord, figure_layout_spec, make_blockwords, state_digest

MATCH = "match"
MISMATCH = "mismatch"
NO_PREDICTION = "no-prediction"


@dataclass(frozen=True)
class MonitorVerdict:
    kind: str
    expected: Optional[str] = None  # predicted action uid
    observed: Optional[str] = None

    def as_dict(self) -> dict:
        return {"kind": self.kind, "expected": self.expected, "observed": self.observed}


@dataclass(frozen=True)
class SessionConfig:
    problem: Problem
    hypotheses: tuple[GoalHypothesis, ...]
    tau: float = 0.5
    beta: float = 1.0
    head_start: int = 0
    fallback: str = FALLBACK_NOOP
    mode: str = "optimal"
    # node-capped so live turns stay bounded and replay-deterministic
    budget: SearchBudget = field(default_factory=lambda: SearchBudget(12_000, 60_000.0))
    seed: int = 0
    user: str = "user"
    agent: str = "agent"
    true_goal: Optional[str] = None
    finish_when_satisfied: bool = True
    workers: int = 1
    source: Optional[dict] = None  # jsonable description used for log replay

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError(f"tau must be in [0, 1], got {self.tau}")
        if self.beta <= 0:
            raise ValidationError("beta must be positive")
        if self.head_start < 0:
            raise ValidationError("head start must be >= 0")
        if self.mode not in ("optimal", "satisficing"):
            raise ValidationError(f"unknown planning mode {self.mode!r}")
        if self.fallback not in (FALLBACK_NOOP, FALLBACK_DEFAULT_GOAL):
            raise ValidationError(f"unknown fallback policy {self.fallback!r}")
        if len(self.problem.actors) < 2:
            raise ValidationError("a session needs a turn-taking problem with two actors")
        for who in (self.user, self.agent):
            if who not in self.problem.actors:
                raise ValidationError(f"actor {who!r} is not part of the problem")
        if not self.hypotheses:
            raise ValidationError("at least one goal hypothesis is required")
        labels = [h.label for h in self.hypotheses]
        if len(set(labels)) != len(labels):
            raise ValidationError("hypothesis labels must be unique")
        if abs(sum(h.prior for h in self.hypotheses) - 1.0) > 1e-9:
            raise ValidationError("hypothesis priors must sum to 1")
        if self.true_goal is not None and self.true_goal not in labels:
            raise ValidationError(f"true goal {self.true_goal!r} is not a hypothesis")

    @staticmethod
    def blockwords(
        spec: Optional[BlockWordsSpec] = None,
        priors: Optional[dict] = None,
        **kwargs,
    ) -> "SessionConfig":
        spec = spec or figure_layout_spec()
        problem, goals = make_blockwords(spec)
        if priors is None:
            hypotheses = uniform_hypotheses(zip(spec.words, goals))
        else:
            hypotheses = tuple(
                GoalHypothesis(w, g, priors[w]) for w, g in zip(spec.words, goals)
            )
        source = {
            "blockwords": {
                "stacks": [list(s) for s in spec.stacks],
                "words": list(spec.words),
                "actors": list(spec.actors),
            }
        }
        return SessionConfig(problem, hypotheses, source=source, **kwargs)

    def to_jsonable(self) -> dict:
        if self.source is None:
            raise ValidationError("config has no serializable source description")
        return {
            "source": self.source,
            "tau": self.tau,
            "beta": self.beta,
            "headStart": self.head_start,
            "fallback": self.fallback,
            "mode": self.mode,
            "budgetNodes": self.budget.max_nodes,
            "budgetMs": self.budget.max_ms,
            "seed": self.seed,
            "user": self.user,
            "agent": self.agent,
            "trueGoal": self.true_goal,
            "finishWhenSatisfied": self.finish_when_satisfied,
            "priors": {h.label: h.prior for h in self.hypotheses},
        }

    @staticmethod
    def from_jsonable(data: dict) -> "SessionConfig":
        source = data["source"]
        priors = data.get("priors")
        if "blockwords" in source:
            bw = source["blockwords"]
            spec = BlockWordsSpec(
                stacks=tuple(tuple(s) for s in bw["stacks"]),
                words=tuple(bw["words"]),
                actors=tuple(bw["actors"]),
            )
            problem, goals = make_blockwords(spec)
            pairs = [
                (w, g) for w, g in zip(spec.words, goals) if priors is None or w in priors
            ]
            hypotheses = tuple(
                GoalHypothesis(w, g, priors[w] if priors else 1.0 / len(pairs))
                for w, g in pairs
            )
        else:
            domain = modelio.parse_domain(source["domain"])
            pd = modelio.parse_problem(source["problem"])
            problem = modelio.ground(domain, pd)
            goals = {
                label: frozenset(Atom.parse(a) for a in atoms_)
                for label, atoms_ in source["goals"].items()
            }
            hypotheses = tuple(
                GoalHypothesis(label, goal, priors[label] if priors else 1.0 / len(goals))
                for label, goal in goals.items()
            )
        return SessionConfig(
            problem,
            hypotheses,
            tau=data["tau"],
            beta=data["beta"],
            head_start=data["headStart"],
            fallback=data["fallback"],
            mode=data["mode"],
            budget=SearchBudget(data["budgetNodes"], data["budgetMs"]),
            seed=data["seed"],
            user=data["user"],
            agent=data["agent"],
            true_goal=data.get("trueGoal"),
            finish_when_satisfied=data.get("finishWhenSatisfied", True),
            source=source,
        )


@dataclass
class SessionCounters:
    recognition_calls: int = 0
    mismatches: int = 0
    conflict_fallbacks: int = 0
    fallbacks: int = 0
    degraded_turns: int = 0

    def as_dict(self) -> dict:
        return {
            "recognitionCalls": self.recognition_calls,
            "mismatches": self.mismatches,
            "conflictFallbacks": self.conflict_fallbacks,
            "fallbacks": self.fallbacks,
            "degradedTurns": self.degraded_turns,
        }


def _prior_posterior(hypotheses: Sequence) -> GoalPosterior:
    labels = tuple(h.label for h in hypotheses)
    diags = tuple(GoalDiagnostic(h.label, None, None, None, None) for h in hypotheses)
    return GoalPosterior(labels, tuple(h.prior for h in hypotheses), diags)


class Session:
    """One user+agent game.  Not thread-safe; callers serialize commands."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.world = config.problem.init
        if turn_atom(config.user) not in self.world:
            raise ValidationError("the user must have the first move")
        self.turn_owner = config.user
        self.observations: list[GroundAction] = []
        self.user_actions_seen = 0
        self.posterior = _prior_posterior(config.hypotheses)
        self.igoal: Optional[IntermediateGoal] = None
        self.active_plan: Optional[JointPlan] = None
        self.cursor = 0
        self.predicted_user: Optional[GroundAction] = None
        self.last_verdict: Optional[MonitorVerdict] = None
        self.monitor_history: list[MonitorVerdict] = []
        self.turn_counter = 0
        self.terminal = False
        self.last_decision = "init"
        self.counters = SessionCounters()
        self.records: list[LogRecord] = []
        self._recog_problem = without_turn_taking(config.problem)
        self._recog_base = self._recog_problem.init
        self._dropped_observations = 0
        # joint model used right after the user declined to act: the plan
        # may not budget substantive user steps it has no reason to expect
        self._agent_only_problem = dataclasses.replace(
            config.problem,
            actions=tuple(
                a
                for a in config.problem.actions
                if a.actor != config.user or a.base_name == "noop"
            ),
        )
        self._recog_config = RecognitionConfig(
            beta=config.beta, mode=config.mode, budget=config.budget, workers=config.workers
        )
        # recognize() is pure in the evidence stream; passes add no evidence,
        # so stalled exchanges would otherwise recompute the same posterior
        self._posterior_cache: dict = {}
        self._responder_config = ResponderConfig(
            tau=config.tau, fallback=config.fallback, agent=config.agent
        )

    # -- queries ---------------------------------------------------------

    def legal_actions(self) -> list[GroundAction]:
        return [
            a
            for a in self.config.problem.actions
            if a.actor == self.turn_owner and applicable(self.world, a)
        ]

    def satisfied_goals(self) -> tuple[str, ...]:
        return tuple(
            h.label for h in self.config.hypotheses if satisfies(self.world, h.goal)
        )

    def is_terminal(self) -> tuple[bool, tuple[str, ...]]:
        return self.terminal, self.satisfied_goals()

    def resolve_action(self, name: str, args: Sequence[str]) -> GroundAction:
        uid = f"{name}({','.join(args)})"
        return self.config.problem.action(uid)

    # -- user turn -------------------------------------------------------

    def submit_user_action(self, action: Union[GroundAction, str]) -> MonitorVerdict:
        if isinstance(action, str):
            action = self.config.problem.action(action)
        if self.terminal:
            raise TurnError("the session is finished")
        if self.turn_owner != self.config.user:
            raise TurnError("it is not the user's turn")
        if action.actor != self.config.user:
            raise TurnError(f"{action.uid} does not belong to the user")
        if not applicable(self.world, action):
            raise PreconditionError(action.uid, sorted(action.pre - self.world))

        if self.predicted_user is None:
            verdict = MonitorVerdict(NO_PREDICTION, None, action.uid)
            self.active_plan = None
            self.cursor = 0
        elif action.key() == self.predicted_user.key():
            verdict = MonitorVerdict(MATCH, self.predicted_user.uid, action.uid)
            self.cursor += 1  # step past the matched user action
        else:
            verdict = MonitorVerdict(MISMATCH, self.predicted_user.uid, action.uid)
            self.counters.mismatches += 1
            self.active_plan = None
            self.cursor = 0
        self.predicted_user = None
        self.last_verdict = verdict
        self.monitor_history.append(verdict)

        self._execute(action, verdict=verdict)
        return verdict

    # -- agent turn ------------------------------------------------------

    def agent_step(self) -> tuple[GroundAction, dict]:
        if self.terminal:
            raise TurnError("the session is finished")
        if self.turn_owner != self.config.agent:
            raise TurnError("it is not the agent's turn")

        cfg = self.config
        noop = cfg.problem.action(f"noop({cfg.agent})")
        action: GroundAction

        if self.user_actions_seen < cfg.head_start:
            action = noop
            self.last_decision = "head-start"
        elif (
            self.active_plan is not None
            and self.last_verdict is not None
            and self.last_verdict.kind == MATCH
            and self.cursor < len(self.active_plan.steps)
            and self.active_plan.steps[self.cursor].actor == cfg.agent
        ):
            action = self.active_plan.steps[self.cursor]
            self.cursor += 1
            self._set_prediction()
            self.last_decision = "plan-continue"
        else:
            action = self._decide()

        self._execute(action)
        return action, self.debug_snapshot()

    def recognition_observations(self) -> list[GroundAction]:
        """The evidence stream: the user's substantive actions.

        Passes change nothing, so feeding them to the recognizer would let
        every avoidance plan dodge full compliance for free (skip the no-op)
        and flatten all likelihoods.  The agent's own actions are not
        evidence of user intent either; they reach the recognizer implicitly
        because the turn-free model lets compliant plans interleave agent
        actions wherever the observed user actions need them.
        """
        user = self.config.user
        return [
            self._as_observation(a)
            for a in self.observations
            if a.base_name != "noop" and a.actor == user
        ]

    def _decide(self) -> GroundAction:
        cfg = self.config
        self.active_plan = None
        self.cursor = 0
        self.predicted_user = None

        evidence = self.recognition_observations()
        key = (self._dropped_observations, tuple(a.uid for a in evidence))
        cached = self._posterior_cache.get(key)
        if cached is None:
            cached = recognize(
                self._recog_problem.with_init(self._recog_base),
                cfg.hypotheses,
                evidence,
                self._recog_config,
            )
            self._posterior_cache[key] = cached
        self.posterior = cached
        self.counters.recognition_calls += 1
        if self.posterior.degraded:
            self.counters.degraded_turns += 1

        if not self.posterior.feasible:
            self.igoal = None
            self.last_decision = "no-hypothesis-fallback"
            self.counters.fallbacks += 1
            return fallback_action(cfg.problem, self.world, self._responder_config, cfg.budget)

        self.igoal = intermediate_goal(
            cfg.hypotheses,
            self.posterior,
            self._responder_config,
            self.world,
            cfg.problem.mutex_groups,
        )
        if self.igoal.conflicts:
            self.last_decision = "conflict-fallback"
            self.counters.conflict_fallbacks += 1
            self.counters.fallbacks += 1
            return fallback_action(cfg.problem, self.world, self._responder_config, cfg.budget)
        if self.igoal.satisfied_already:
            self.last_decision = "satisfied-fallback"
            self.counters.fallbacks += 1
            return fallback_action(cfg.problem, self.world, self._responder_config, cfg.budget)

        model = self._agent_only_problem if self._user_just_passed() else cfg.problem
        outcome = joint_plan(model, self.world, self.igoal, cfg.budget, user=cfg.user)
        if not outcome.solved:
            self.last_decision = f"plan-{outcome.status}-fallback"
            self.counters.conflict_fallbacks += 1
            self.counters.fallbacks += 1
            return fallback_action(cfg.problem, self.world, self._responder_config, cfg.budget)

        self.active_plan = as_joint(outcome, self.igoal.atoms)
        first = self.active_plan.steps[0]
        if first.actor != cfg.agent:  # cannot happen with turn atoms intact
            raise ModelError("joint plan does not start with the agent's action")
        self.cursor = 1
        self._set_prediction()
        self.last_decision = "planned"
        return first

    def _user_just_passed(self) -> bool:
        for action in reversed(self.observations):
            if action.actor == self.config.user:
                return action.base_name == "noop"
        return False

    def _set_prediction(self):
        plan_ = self.active_plan
        if plan_ is not None and self.cursor < len(plan_.steps):
            step = plan_.steps[self.cursor]
            self.predicted_user = step if step.actor == self.config.user else None
        else:
            self.predicted_user = None
            if plan_ is not None and self.cursor >= len(plan_.steps):
                self.active_plan = None  # plan completed; replan next time
                self.cursor = 0

    # -- shared turn bookkeeping ------------------------------------------

    def _as_observation(self, action: GroundAction) -> GroundAction:
        return self._recog_problem.action(action.uid)

    def _execute(self, action: GroundAction, verdict: Optional[MonitorVerdict] = None):
        self.world = apply(self.world, action)
        self.observations.append(action)
        if action.actor == self.config.user and action.base_name != "noop":
            self.user_actions_seen += 1  # head start counts substantive evidence
        self.turn_counter += 1
        self.turn_owner = (
            self.config.agent if action.actor == self.config.user else self.config.user
        )
        if self.config.finish_when_satisfied and self.satisfied_goals():
            self.terminal = True
        self.records.append(
            LogRecord(
                turn=self.turn_counter,
                actor=action.actor,
                action=action.uid,
                digest=state_digest(self.world),
                posterior=self._posterior_payload(),
                intermediate=self.igoal.as_dict() if self.igoal else None,
                verdict=verdict.as_dict() if verdict else None,
                ts=time.time(),
            )
        )

    def _posterior_payload(self) -> dict:
        return {
            "probs": self.posterior.as_dict(),
            "degraded": self.posterior.degraded,
            "feasible": self.posterior.feasible,
        }

    def quit(self):
        self.terminal = True

    # -- observation window -------------------------------------------------

    def truncate_observations(self, keep_last: int):
        """Drop all but the last `keep_last` observations and rebase the
        recognition model on the state where the kept suffix starts.

        Exploratory control for long-running sessions; posteriors computed
        afterwards condition only on the kept suffix.
        """
        if keep_last < 0:
            raise ValidationError("keep_last must be >= 0")
        drop = len(self.observations) - keep_last
        if drop <= 0:
            return
        base = self._recog_base
        for action in self.observations[:drop]:
            base = apply(base, self._as_observation(action))
        self._recog_base = base
        self._dropped_observations += drop
        self.observations = self.observations[drop:]

    # -- introspection ----------------------------------------------------

    def debug_snapshot(self) -> dict:
        terminal, satisfied = self.is_terminal()
        return {
            "turn": self.turn_counter,
            "turnOwner": self.turn_owner,
            "terminal": terminal,
            "satisfiedWords": list(satisfied),
            "decision": self.last_decision,
            "headStartRemaining": max(0, self.config.head_start - self.user_actions_seen),
            "posterior": self._posterior_payload(),
            "costs": self.posterior.diagnostics_dict(),
            "intermediate": self.igoal.as_dict() if self.igoal else None,
            "jointPlan": self.active_plan.as_dict() if self.active_plan else None,
            "cursor": self.cursor,
            "predictedUser": self.predicted_user.uid if self.predicted_user else None,
            "monitor": [v.as_dict() for v in self.monitor_history],
            "counters": self.counters.as_dict(),
            "observations": [a.uid for a in self.observations],
        }

    def log_header(self) -> dict:
        return modelio.log_header(self.config.to_jsonable())


# ---------------------------------------------------------------------------
# log replay


@dataclass
class ReplayReport:
    turns: int
    ok: bool = True


def replay_log(path) -> ReplayReport:
    """Re-run a session log and verify digests, agent actions, posteriors,
    and intermediate goals reproduce exactly."""
    header, records = modelio.read_log(path)
    config = SessionConfig.from_jsonable(header["config"])
    session = Session(config)
    for i, rec in enumerate(records):
        lineno = i + 2
        if rec.actor == config.user:
            try:
                session.submit_user_action(rec.action)
            except (TurnError, PreconditionError, ModelError) as exc:
                raise DigestMismatchError(f"user action does not replay: {exc}", lineno)
        elif rec.actor == config.agent:
            action, _ = session.agent_step()
            if action.uid != rec.action:
                raise DigestMismatchError(
                    f"agent action diverged: log has {rec.action}, replay chose {action.uid}",
                    lineno,
                )
        else:
            raise DigestMismatchError(f"unknown actor {rec.actor!r}", lineno)
        replayed = session.records[-1]
        if replayed.digest != rec.digest:
            raise DigestMismatchError("state digest mismatch", lineno)
        if replayed.posterior != rec.posterior:
            raise DigestMismatchError("posterior snapshot mismatch", lineno)
        if replayed.intermediate != rec.intermediate:
            raise DigestMismatchError("intermediate goal mismatch", lineno)
    return ReplayReport(turns=len(records))
