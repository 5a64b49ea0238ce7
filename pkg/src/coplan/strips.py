"""Propositional STRIPS world model.

Ground-only representation: atoms, states, ground actions, conjunctive
goals, and at-most-one mutex templates.  All values are immutable and the
operations are pure functions, so they can be shared freely across
concurrent planner calls.

Action costs are non-negative integers in milli-units (a unit-cost action
costs 1000) so that cost comparisons are exact.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import ModelError, PreconditionError

COST_UNIT = 1000  # milli-units per "one action"

TURN_PREDICATE = "turn"


@dataclass(frozen=True, order=True)
class Atom:
    """A ground atom: predicate applied to object names."""

    predicate: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(self.args)})"

    @staticmethod
    def parse(text: str) -> "Atom":
        """Inverse of str(): "on(t,h)" -> Atom("on", ("t", "h"))."""
        text = text.strip()
        if "(" not in text:
            return Atom(text)
        if not text.endswith(")"):
            raise ModelError(f"malformed atom text: {text!r}")
        pred, rest = text.split("(", 1)
        args = tuple(a.strip() for a in rest[:-1].split(",") if a.strip())
        return Atom(pred, args)


State = frozenset  # frozenset[Atom]
Goal = frozenset  # frozenset[Atom]; the empty conjunction is the trivial goal


def atoms(*specs: str) -> frozenset:
    """Convenience constructor: atoms("on(t,h)", "clear(t)")."""
    return frozenset(Atom.parse(s) for s in specs)


@dataclass(frozen=True)
class GroundAction:
    """A fully grounded action with STRIPS semantics.

    `args` is the full argument tuple (the acting agent first for
    actor-parameterized schemas); `actor` repeats the acting agent so
    turn-taking code does not need to know argument conventions.
    """

    name: str
    args: tuple[str, ...]
    actor: str
    pre: frozenset
    add: frozenset
    dele: frozenset
    cost: int = COST_UNIT

    def __post_init__(self):
        if self.cost < 0:
            raise ModelError(f"action {self.uid} has negative cost {self.cost}")
        overlap = self.add & self.dele
        if overlap:
            raise ModelError(
                f"action {self.uid} adds and deletes {sorted(map(str, overlap))}"
            )

    @property
    def uid(self) -> str:
        return f"{self.name}({','.join(self.args)})"

    @property
    def base_name(self) -> str:
        """Schema name with any compilation suffix ("pickup/obs3") removed."""
        return self.name.split("/", 1)[0]

    def key(self) -> tuple:
        """Structural identity used by the execution monitor."""
        return (self.name, self.args, self.actor)

    def __str__(self) -> str:
        return self.uid


@dataclass(frozen=True)
class MutexGroup:
    """At-most-one template over a single predicate.

    One argument position varies; for every fixed combination of the other
    arguments, at most one atom of the family may hold.  Example: predicate
    "on", var_pos 0 means "at most one x with on(x,y), for each y".
    """

    predicate: str
    arity: int
    var_pos: int

    def bucket_key(self, atom: Atom) -> Optional[tuple]:
        if atom.predicate != self.predicate or len(atom.args) != self.arity:
            return None
        fixed = tuple(a for i, a in enumerate(atom.args) if i != self.var_pos)
        return (self.predicate, self.var_pos, fixed)


@dataclass(frozen=True)
class Problem:
    """A ground planning problem plus the mutex knowledge of its domain."""

    name: str
    objects: tuple[tuple[str, str], ...]  # (object name, type name)
    actions: tuple[GroundAction, ...]
    init: frozenset
    goal: frozenset
    mutex_groups: tuple[MutexGroup, ...] = ()
    actors: tuple[str, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.actions, key=lambda a: a.uid))
        object.__setattr__(self, "actions", ordered)
        violations = state_mutex_violations(self.init, self.mutex_groups)
        if violations:
            pair = violations[0]
            raise ModelError(f"initial state violates a mutex group: {pair[0]} vs {pair[1]}")

    @property
    def action_index(self) -> dict:
        idx = self.__dict__.get("_action_index")
        if idx is None:
            idx = {a.uid: a for a in self.actions}
            self.__dict__["_action_index"] = idx
        return idx

    def action(self, uid: str) -> GroundAction:
        try:
            return self.action_index[uid]
        except KeyError:
            raise ModelError(f"unknown action: {uid}") from None

    def with_goal(self, goal: Iterable) -> "Problem":
        return dataclasses.replace(self, goal=frozenset(goal))

    def with_init(self, init: Iterable) -> "Problem":
        return dataclasses.replace(self, init=frozenset(init))

    def object_names(self) -> frozenset:
        return frozenset(name for name, _ in self.objects)


def applicable(state: frozenset, action: GroundAction) -> bool:
    """True iff every precondition atom holds in `state`."""
    return action.pre <= state


def missing_preconditions(state: frozenset, action: GroundAction) -> list:
    return sorted(action.pre - state)


def apply(state: frozenset, action: GroundAction) -> frozenset:
    """Apply a STRIPS action: (state - deletes) | adds.

    Raises PreconditionError naming the missing atoms when inapplicable.
    """
    if not action.pre <= state:
        raise PreconditionError(action.uid, missing_preconditions(state, action))
    return (state - action.dele) | action.add


def satisfies(state: frozenset, goal: frozenset) -> bool:
    """True iff the conjunctive goal holds (the empty goal always holds)."""
    return goal <= state


def _mutex_buckets(atoms_: Iterable, groups: Iterable) -> dict:
    buckets: dict = {}
    for group in groups:
        for atom in atoms_:
            key = group.bucket_key(atom)
            if key is not None:
                buckets.setdefault(key, []).append(atom)
    return buckets


def goal_conflicts(goal: frozenset, groups: Iterable) -> list:
    """All pairs of goal atoms that fall in one instantiated mutex group.

    Returns a sorted list of (atom, atom) pairs; empty iff the goal is
    mutex-consistent.
    """
    pairs = set()
    for bucket in _mutex_buckets(goal, groups).values():
        if len(bucket) < 2:
            continue
        bucket = sorted(set(bucket))
        for i, a in enumerate(bucket):
            for b in bucket[i + 1:]:
                pairs.add((a, b))
    return sorted(pairs)


def state_mutex_violations(state: frozenset, groups: Iterable) -> list:
    """Like goal_conflicts but for full states (used by validity checks)."""
    return goal_conflicts(state, groups)


def turn_atom(actor: str) -> Atom:
    return Atom(TURN_PREDICATE, (actor,))


def _strip_turn(atoms_: frozenset) -> frozenset:
    return frozenset(a for a in atoms_ if a.predicate != TURN_PREDICATE)


def without_turn_taking(problem: Problem) -> Problem:
    """The same problem with all turn atoms removed.

    Every actor's actions become freely interleavable; this is the model
    the recognizer plans in, so that any interleaved observation history
    stays executable.
    """
    actions = tuple(
        dataclasses.replace(
            a, pre=_strip_turn(a.pre), add=_strip_turn(a.add), dele=_strip_turn(a.dele)
        )
        for a in problem.actions
    )
    return dataclasses.replace(
        problem,
        name=f"{problem.name}-free",
        actions=actions,
        init=_strip_turn(problem.init),
        goal=_strip_turn(problem.goal),
    )


def restrict_to_actor(problem: Problem, actor: str) -> Problem:
    """Keep only one actor's actions (solo projection of a joint model)."""
    actions = tuple(a for a in problem.actions if a.actor == actor)
    if not actions:
        raise ModelError(f"problem has no actions for actor {actor!r}")
    return dataclasses.replace(problem, name=f"{problem.name}-{actor}", actions=actions, actors=(actor,))
