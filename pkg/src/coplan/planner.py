"""Forward state-space search: optimal (A*) and satisficing (greedy) planning.

States are compiled to integer bitmasks for speed; the public API stays in
terms of the strips-level types.  Optimal mode requires an admissible
heuristic: the delete-relaxation hmax always qualifies, and for problems
whose ground actions provably match the one-hand pick/place schema a much
stronger counting heuristic is selected automatically (it lower-bounds the
number of grasps and placements any plan must still perform).

Costs are integer milli-units throughout; math.inf marks unreachability.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Optional

from .errors import BudgetExhaustedError, ModelError
from .strips import COST_UNIT, Atom, GroundAction, Problem, goal_conflicts

INF = math.inf

_MARKER_PREFIX = "complied-"
_MARKER_PREDICATES = ("not-complied", "impossible")


def _is_bookkeeping(atom: Atom) -> bool:
    return (
        atom.predicate == "turn"
        or atom.predicate.startswith(_MARKER_PREFIX)
        or atom.predicate in _MARKER_PREDICATES
    )


@dataclass(frozen=True)
class SearchBudget:
    max_nodes: int = 200_000
    max_ms: float = 20_000.0

    def __post_init__(self):
        if self.max_nodes <= 0 or self.max_ms <= 0:
            raise ModelError("search budget values must be positive")


@dataclass(frozen=True)
class Plan:
    steps: tuple[GroundAction, ...]
    cost: int

    def __len__(self) -> int:
        return len(self.steps)

    def uids(self) -> tuple[str, ...]:
        return tuple(a.uid for a in self.steps)


@dataclass(frozen=True)
class PlanOutcome:
    status: str  # "solved" | "unsolvable" | "budget-exhausted"
    plan: Optional[Plan] = None
    reason: str = ""
    expanded: int = 0
    elapsed_ms: float = 0.0

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    @property
    def unsolvable(self) -> bool:
        return self.status == "unsolvable"

    @property
    def exhausted(self) -> bool:
        return self.status == "budget-exhausted"


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    step_index: Optional[int] = None  # 0-based first failing step; len(steps) = goal unmet
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


# ---------------------------------------------------------------------------
# compilation to bitmasks


class CompiledProblem:
    def __init__(self, problem: Problem):
        self.problem = problem
        universe: dict[Atom, int] = {}

        def intern(atom: Atom) -> int:
            if atom not in universe:
                universe[atom] = len(universe)
            return universe[atom]

        for atom in sorted(problem.init):
            intern(atom)
        for action in problem.actions:
            for atom in sorted(action.pre | action.add | action.dele):
                intern(atom)
        self.atom_ids = universe
        self.atoms = list(universe)
        # canonical tie-break order: no-ops sort after substantive actions,
        # so cost ties resolve toward plans where hands actually work
        self.actions = sorted(problem.actions, key=lambda a: (a.base_name == "noop", a.uid))
        self.pre_masks = []
        self.add_masks = []
        self.del_masks = []
        self.costs = []
        for action in self.actions:
            self.pre_masks.append(self._mask(action.pre))
            self.add_masks.append(self._mask(action.add))
            self.del_masks.append(self._mask(action.dele))
            self.costs.append(action.cost)
        self.init_mask = self._mask(problem.init)
        # consumers[atom_id] = indices of actions with that atom in pre
        self.consumers: list[list[int]] = [[] for _ in self.atoms]
        self.pre_sizes = []
        for idx, action in enumerate(self.actions):
            self.pre_sizes.append(len(action.pre))
            for atom in action.pre:
                self.consumers[self.atom_ids[atom]].append(idx)
        # successor generation: each action watches one pivot precondition,
        # so expansions only scan actions whose pivot currently holds
        self.pivot_buckets: list[list[int]] = [[] for _ in self.atoms]
        self.always_applicable: list[int] = []
        for idx, action in enumerate(self.actions):
            if not action.pre:
                self.always_applicable.append(idx)
                continue
            pivot = min(
                (self.atom_ids[a] for a in action.pre),
                key=lambda i: (len(self.pivot_buckets[i]), i),
            )
            self.pivot_buckets[pivot].append(idx)
        self.blocks_profile = _make_blocks_profile(self)

    def _mask(self, atoms_: Iterable) -> int:
        m = 0
        for atom in atoms_:
            m |= 1 << self.atom_ids[atom]
        return m

    def goal_info(self, goal: frozenset) -> tuple[int, list]:
        """(mask of in-universe goal atoms, goal atoms outside the universe)."""
        mask = 0
        outside = []
        for atom in goal:
            bit = self.atom_ids.get(atom)
            if bit is None:
                outside.append(atom)
            else:
                mask |= 1 << bit
        return mask, outside

    def state_mask(self, state: frozenset) -> int:
        mask, outside = self.goal_info(state)
        if outside:
            raise ModelError(f"state atom {outside[0]} is not part of this problem")
        return mask

    def mask_state(self, mask: int) -> frozenset:
        return frozenset(a for a, i in self.atom_ids.items() if mask >> i & 1)


@lru_cache(maxsize=64)
def _compile(problem_sans_goal: Problem) -> CompiledProblem:
    return CompiledProblem(problem_sans_goal)


def compiled(problem: Problem) -> CompiledProblem:
    return _compile(problem.with_goal(frozenset()))


# ---------------------------------------------------------------------------
# delete-relaxation heuristics (hmax admissible, hadd informative)


def _relaxation_values(
    comp: CompiledProblem, state_mask: int, combine_max: bool, skip: frozenset = frozenset()
) -> list:
    """Cheapest relaxed-achievement value per atom (hmax or hadd semantics).

    `skip` holds indices of forbidden actions that must not fire.
    """
    n = len(comp.atoms)
    values = [INF] * n
    queue = []
    for i in range(n):
        if state_mask >> i & 1:
            values[i] = 0
            queue.append((0, i))
    heapq.heapify(queue)
    remaining = list(comp.pre_sizes)
    acc = [0] * len(comp.actions)
    settled = [False] * n

    def fire(idx: int, base):
        val = comp.costs[idx] + base
        add_mask = comp.add_masks[idx]
        i = 0
        m = add_mask
        while m:
            if m & 1 and val < values[i]:
                values[i] = val
                heapq.heappush(queue, (val, i))
            m >>= 1
            i += 1

    for idx in range(len(comp.actions)):
        if idx in skip:
            continue
        if remaining[idx] == 0:
            fire(idx, 0)

    while queue:
        val, i = heapq.heappop(queue)
        if settled[i] or val > values[i]:
            continue
        settled[i] = True
        for idx in comp.consumers[i]:
            if idx in skip:
                continue
            remaining[idx] -= 1
            if combine_max:
                if val > acc[idx]:
                    acc[idx] = val
            else:
                acc[idx] += val
            if remaining[idx] == 0:
                fire(idx, acc[idx])
    return values


def _relaxed_goal_value(values: list, comp: CompiledProblem, goal: frozenset, combine_max: bool):
    total = 0
    for atom in goal:
        bit = comp.atom_ids.get(atom)
        v = values[bit] if bit is not None else INF
        if v is INF:
            return INF
        total = max(total, v) if combine_max else total + v
    return total


def heuristic(problem: Problem, state: frozenset, goal: frozenset, kind: str = "hmax"):
    """Cost-to-go estimate in milli-units; math.inf when relaxed-unreachable.

    hmax never exceeds the true optimal cost; hadd may.  Both are 0 iff the
    goal is already satisfied.
    """
    comp = compiled(problem)
    mask = comp.state_mask(state)
    if kind in ("hmax", "hadd"):
        values = _relaxation_values(comp, mask, combine_max=(kind == "hmax"))
        return _relaxed_goal_value(values, comp, goal, combine_max=(kind == "hmax"))
    if kind == "blocks":
        if comp.blocks_profile is None:
            raise ModelError("problem actions do not match the one-hand block schema")
        return comp.blocks_profile.evaluate(mask, _BlocksGoal(comp.blocks_profile, goal))
    raise ModelError(f"unknown heuristic kind: {kind!r}")


# ---------------------------------------------------------------------------
# counting heuristic for one-hand pick/place problems


class _BlocksProfile:
    """Per-problem tables for the counting heuristic (see _make_blocks_profile).

    When the problem carries observation-compliance variants ("name/obsI"),
    the heuristic also counts the grasps and placements still owed to the
    remaining observed steps; a per-block max with the goal-driven counts
    keeps the bound admissible, and an observed placement onto a non-goal
    destination adds one provably extra placement.
    """

    TABLE = "#table"

    def __init__(self, comp: CompiledProblem, blocks, hands):
        self.comp = comp
        self.blocks = sorted(blocks)
        self.hands = sorted(hands)
        ids = comp.atom_ids
        self.on_bits = {}
        for x in self.blocks:
            for y in self.blocks:
                if x != y:
                    bit = ids.get(Atom("on", (x, y)))
                    if bit is not None:
                        self.on_bits[(x, y)] = 1 << bit
        self.holding_bits = {}
        for h in self.hands:
            for x in self.blocks:
                bit = ids.get(Atom("holding", (h, x)))
                if bit is not None:
                    self.holding_bits[(h, x)] = 1 << bit
        self._build_observation_tables(comp)

    def _build_observation_tables(self, comp: CompiledProblem):
        steps: dict[int, tuple] = {}
        for action in comp.actions:
            if "/obs" not in action.name:
                continue
            pos = int(action.name.split("/obs", 1)[1])
            base = action.base_name
            if base in ("pickup", "unstack"):
                steps[pos] = ("grasp", action.args[1], None)
            elif base == "putdown":
                steps[pos] = ("place", action.args[1], self.TABLE)
            elif base == "stack":
                steps[pos] = ("place", action.args[1], action.args[2])
            # noop observations carry no physical work
        self.obs_len = max(steps, default=0)
        self.level_bits = []
        # per level j, per block: (#remaining grasps, #remaining places,
        # targets of places after the block's last remaining grasp)
        self.obs_tables: list[dict] = []
        if not self.obs_len:
            return
        grasps: dict[str, int] = {}
        places: dict[str, list] = {}  # block -> [(pos, target)]
        last_grasp: dict[str, int] = {}
        levels: list[dict] = [{}] * (self.obs_len + 1)
        for j in range(self.obs_len, -1, -1):
            table = {}
            for x in set(grasps) | set(places):
                lg = last_grasp.get(x, 0)
                final_targets = {t for pos, t in places.get(x, ()) if pos > lg}
                table[x] = (grasps.get(x, 0), len(places.get(x, ())), final_targets)
            levels[j] = table
            if j == 0:
                break
            step = steps.get(j)
            if step:
                kind, block, dest = step
                if kind == "grasp":
                    grasps[block] = grasps.get(block, 0) + 1
                    last_grasp[block] = max(last_grasp.get(block, 0), j)
                else:
                    places.setdefault(block, []).append((j, dest))
        self.obs_tables = levels
        for j in range(self.obs_len + 1):
            bit = self.comp.atom_ids.get(Atom(f"complied-{j}"))
            self.level_bits.append(1 << bit if bit is not None else 0)

    def _current_level(self, state_mask: int) -> int:
        for j, bit in enumerate(self.level_bits):
            if state_mask & bit:
                return j
        return self.obs_len

    def evaluate(self, state_mask: int, goal: "_BlocksGoal") -> int:
        above = {}
        for (x, y), bit in self.on_bits.items():
            if state_mask & bit:
                above[y] = x
        held = {}
        for (h, x), bit in self.holding_bits.items():
            if state_mask & bit:
                held[x] = h

        grasp: set = set()
        place: set = set()
        must_place: set = set()
        target: dict[str, str] = {}  # block -> required resting place, if one

        for x, y in goal.on:
            if state_mask & self.on_bits.get((x, y), 0):
                continue
            place.add(x)
            must_place.add(x)
            target[x] = y
            if x not in held:
                grasp.add(x)
            z = above.get(y)
            if z is not None and z != x:
                grasp.add(z)
        for x in goal.on_table:
            bit = self.comp.atom_ids.get(Atom("on-table", (x,)))
            if bit is not None and state_mask >> bit & 1:
                continue
            place.add(x)
            must_place.add(x)
            target[x] = self.TABLE
            if x not in held:
                grasp.add(x)
        for x in goal.clear:
            bit = self.comp.atom_ids.get(Atom("clear", (x,)))
            if bit is not None and state_mask >> bit & 1:
                continue
            z = above.get(x)
            if z is not None:
                grasp.add(z)
        for h, x in goal.holding:
            if held.get(x) != h:
                grasp.add(x)
        for h in goal.handempty:
            for x, holder in held.items():
                if holder == h:
                    place.add(x)
                    must_place.add(x)

        frontier = list(grasp)
        while frontier:
            b = frontier.pop()
            w = above.get(b)
            if w is not None and w not in grasp:
                grasp.add(w)
                frontier.append(w)
        place |= grasp

        obs_table = self.obs_tables[self._current_level(state_mask)] if self.obs_len else {}

        total = 0
        discountable = 0
        for x in set(place) | set(obs_table):
            og, op, final_targets = obs_table.get(x, (0, 0, ()))
            extra = 0
            if x in target and op and target[x] not in final_targets:
                # no observed placement can double as the goal placement
                extra = 1
            places_x = max(op + extra, 1 if x in place else 0)
            grasps_x = max(og, 1 if x in grasp else 0, places_x - (1 if x in held else 0))
            total += places_x + grasps_x
            if x in place and x not in must_place and op + extra == 0:
                discountable += 1
        discount = min(len(self.hands), discountable)
        return (total - discount) * COST_UNIT


class _BlocksGoal:
    def __init__(self, profile: _BlocksProfile, goal: frozenset):
        self.on = []
        self.on_table = []
        self.clear = []
        self.holding = []
        self.handempty = []
        for atom in goal:
            if _is_bookkeeping(atom):
                continue
            if atom.predicate == "on":
                self.on.append(atom.args)
            elif atom.predicate == "on-table":
                self.on_table.append(atom.args[0])
            elif atom.predicate == "clear":
                self.clear.append(atom.args[0])
            elif atom.predicate == "holding":
                self.holding.append(atom.args)
            elif atom.predicate == "handempty":
                self.handempty.append(atom.args[0])


def _core(atoms_: frozenset) -> frozenset:
    return frozenset(a for a in atoms_ if not _is_bookkeeping(a))


def _make_blocks_profile(comp: CompiledProblem) -> Optional[_BlocksProfile]:
    """Verify every action matches the one-hand schema exactly (modulo turn
    and observation-marker bookkeeping); return evaluation tables if so.

    The strict structural check is what makes the counting heuristic safe to
    select automatically: on any action set that deviates, the planner falls
    back to hmax.
    """
    A = Atom
    blocks: set = set()
    hands: set = set()
    for action in comp.actions:
        pre, add, dele = _core(action.pre), _core(action.add), _core(action.dele)
        name = action.base_name
        args = action.args
        if name == "noop":
            if add or dele:
                return None
            continue
        if name == "pickup" and len(args) == 2:
            a, x = args
            expect = (
                frozenset({A("on-table", (x,)), A("clear", (x,)), A("handempty", (a,))}),
                frozenset({A("holding", (a, x))}),
                frozenset({A("on-table", (x,)), A("clear", (x,)), A("handempty", (a,))}),
            )
        elif name == "putdown" and len(args) == 2:
            a, x = args
            expect = (
                frozenset({A("holding", (a, x))}),
                frozenset({A("on-table", (x,)), A("clear", (x,)), A("handempty", (a,))}),
                frozenset({A("holding", (a, x))}),
            )
        elif name == "stack" and len(args) == 3:
            a, x, y = args
            expect = (
                frozenset({A("holding", (a, x)), A("clear", (y,))}),
                frozenset({A("on", (x, y)), A("clear", (x,)), A("handempty", (a,))}),
                frozenset({A("holding", (a, x)), A("clear", (y,))}),
            )
        elif name == "unstack" and len(args) == 3:
            a, x, y = args
            expect = (
                frozenset({A("on", (x, y)), A("clear", (x,)), A("handempty", (a,))}),
                frozenset({A("holding", (a, x)), A("clear", (y,))}),
                frozenset({A("on", (x, y)), A("clear", (x,)), A("handempty", (a,))}),
            )
        else:
            return None
        if (pre, add, dele) != expect or action.cost < COST_UNIT:
            return None
        hands.add(args[0])
        blocks.update(args[1:])
    if not blocks or not hands:
        return None
    return _BlocksProfile(comp, blocks, hands)


# ---------------------------------------------------------------------------
# search


class _BudgetTracker:
    def __init__(self, budget: SearchBudget):
        self.budget = budget
        self.expanded = 0
        self.start = time.monotonic()

    def tick(self) -> bool:
        """Count one expansion; True while within budget."""
        self.expanded += 1
        if self.expanded > self.budget.max_nodes:
            return False
        if self.expanded % 512 == 0:
            if (time.monotonic() - self.start) * 1000.0 > self.budget.max_ms:
                return False
        return True

    @property
    def elapsed_ms(self) -> float:
        return (time.monotonic() - self.start) * 1000.0


def _heuristic_fn(comp: CompiledProblem, goal: frozenset, kind: str) -> Callable[[int], float]:
    if kind == "blocks" and comp.blocks_profile is not None:
        bg = _BlocksGoal(comp.blocks_profile, goal)
        profile = comp.blocks_profile
        return lambda mask: profile.evaluate(mask, bg)
    if kind == "blocks":
        raise ModelError("problem actions do not match the one-hand block schema")

    def h(mask: int) -> float:
        values = _relaxation_values(comp, mask, combine_max=(kind == "hmax"))
        return _relaxed_goal_value(values, comp, goal, combine_max=(kind == "hmax"))

    return h


def _pick_heuristic(comp: CompiledProblem, mode: str, kind: str) -> str:
    if kind != "auto":
        return kind
    if mode != "optimal":
        # the counting bound is ordering-blind, which misleads pure greedy
        # descent; the additive relaxation prices unstacking work instead
        return "hadd"
    return "blocks" if comp.blocks_profile is not None else "hmax"


def plan(
    problem: Problem,
    mode: str = "optimal",
    budget: Optional[SearchBudget] = None,
    heuristic_kind: str = "auto",
    defer_actor: Optional[str] = None,
) -> PlanOutcome:
    """Search for a plan achieving problem.goal from problem.init.

    Optimal mode runs A* under an admissible heuristic and returns a
    minimum-cost plan; satisficing mode runs greedy best-first search and
    returns any valid plan.  Tie-breaking is deterministic: lower f, then
    lower h, then the lexicographically smallest action sequence under the
    canonical action order (no-ops after substantive actions).

    `defer_actor` adds a secondary lexicographic objective: among minimum-
    cost plans, prefer those with the fewest substantive steps by that
    actor.  The joint planner uses it so assistance never leans on user
    work that a same-cost agent plan could do itself.
    """
    if mode not in ("optimal", "satisficing"):
        raise ModelError(f"unknown planning mode {mode!r}")
    budget = budget or SearchBudget()

    conflicts = goal_conflicts(problem.goal, problem.mutex_groups)
    if conflicts:
        a, b = conflicts[0]
        return PlanOutcome("unsolvable", reason=f"goal conflicts: {a} vs {b}")

    comp = compiled(problem)
    goal_mask, outside = comp.goal_info(problem.goal)
    if outside:
        return PlanOutcome("unsolvable", reason=f"goal atom {outside[0]} has no achiever")

    # Goal atoms no action ever adds must hold initially and must never be
    # deleted, so actions deleting them are forbidden outright.  This both
    # shrinks the search and lets the relaxed-reachability check prove
    # unsolvability for observation-avoidance compilations without search.
    all_adds = 0
    for m in comp.add_masks:
        all_adds |= m
    forbidden = set()
    never_added = goal_mask & ~all_adds
    if never_added:
        if never_added & ~comp.init_mask:
            missing = comp.mask_state(never_added & ~comp.init_mask)
            return PlanOutcome("unsolvable", reason=f"goal atom {sorted(missing)[0]} has no achiever")
        for idx in range(len(comp.actions)):
            if comp.del_masks[idx] & never_added:
                forbidden.add(idx)
    skip = frozenset(forbidden)

    values = _relaxation_values(comp, comp.init_mask, combine_max=True, skip=skip)
    if _relaxed_goal_value(values, comp, problem.goal, combine_max=True) is INF:
        return PlanOutcome("unsolvable", reason="goal is unreachable in the delete relaxation")

    kind = _pick_heuristic(comp, mode, heuristic_kind)
    h = _heuristic_fn(comp, problem.goal, kind)
    tracker = _BudgetTracker(budget)
    if mode == "optimal":
        defer_costs = tuple(
            1 if (a.actor == defer_actor and a.cost > 0) else 0 for a in comp.actions
        )
        return _astar(comp, goal_mask, h, skip, tracker, defer_costs)
    return _greedy(comp, goal_mask, h, skip, tracker)


def _successors(comp: CompiledProblem, mask: int, skip: frozenset):
    pre_masks = comp.pre_masks
    candidates = list(comp.always_applicable)
    m = mask
    while m:
        low = m & -m
        candidates.extend(comp.pivot_buckets[low.bit_length() - 1])
        m ^= low
    candidates.sort()
    for idx in candidates:
        if idx in skip:
            continue
        pre = pre_masks[idx]
        if mask & pre == pre:
            yield idx, (mask & ~comp.del_masks[idx]) | comp.add_masks[idx], comp.costs[idx]


def _astar(comp, goal_mask, h, skip, tracker, defer_costs) -> PlanOutcome:
    h0 = h(comp.init_mask)
    if h0 is INF:
        return PlanOutcome("unsolvable", reason="goal is unreachable in the delete relaxation")
    far = (INF, INF)
    open_heap = [(h0, 0, h0, (), comp.init_mask)]
    g_best = {comp.init_mask: (0, 0)}
    while open_heap:
        f, deferred, hh, seq, mask = heapq.heappop(open_heap)
        g = f - hh
        if (g, deferred) > g_best.get(mask, far):
            continue
        if mask & goal_mask == goal_mask:
            steps = tuple(comp.actions[i] for i in seq)
            return PlanOutcome(
                "solved",
                plan=Plan(steps, int(g)),
                expanded=tracker.expanded,
                elapsed_ms=tracker.elapsed_ms,
            )
        if not tracker.tick():
            return PlanOutcome(
                "budget-exhausted", expanded=tracker.expanded, elapsed_ms=tracker.elapsed_ms
            )
        for idx, nxt, cost in _successors(comp, mask, skip):
            g2 = (g + cost, deferred + defer_costs[idx])
            if g2 < g_best.get(nxt, far):
                h2 = h(nxt)
                if h2 is INF:
                    continue
                g_best[nxt] = g2
                heapq.heappush(open_heap, (g2[0] + h2, g2[1], h2, seq + (idx,), nxt))
    return PlanOutcome(
        "unsolvable",
        reason="search space exhausted",
        expanded=tracker.expanded,
        elapsed_ms=tracker.elapsed_ms,
    )


def _greedy(comp, goal_mask, h, skip, tracker) -> PlanOutcome:
    """Greedy best-first with lazy evaluation: a node is scored when it is
    expanded and its children inherit that score; ties break toward deeper
    nodes so plateaus are descended rather than flooded."""
    h0 = h(comp.init_mask)
    if h0 is INF:
        return PlanOutcome("unsolvable", reason="goal is unreachable in the delete relaxation")
    open_heap = [(h0, 0, (), comp.init_mask, 0)]
    seen = {comp.init_mask}
    while open_heap:
        _, _, seq, mask, g = heapq.heappop(open_heap)
        if mask & goal_mask == goal_mask:
            steps = tuple(comp.actions[i] for i in seq)
            return PlanOutcome(
                "solved",
                plan=Plan(steps, int(g)),
                expanded=tracker.expanded,
                elapsed_ms=tracker.elapsed_ms,
            )
        if not tracker.tick():
            return PlanOutcome(
                "budget-exhausted", expanded=tracker.expanded, elapsed_ms=tracker.elapsed_ms
            )
        h_here = h(mask)
        if h_here is INF:
            continue
        for idx, nxt, cost in _successors(comp, mask, skip):
            if nxt in seen:
                continue
            seen.add(nxt)
            heapq.heappush(open_heap, (h_here, -len(seq) - 1, seq + (idx,), nxt, g + cost))
    return PlanOutcome(
        "unsolvable",
        reason="search space exhausted",
        expanded=tracker.expanded,
        elapsed_ms=tracker.elapsed_ms,
    )


# ---------------------------------------------------------------------------
# plan validation


def validate_plan(problem: Problem, plan_: Plan) -> ValidationResult:
    """Check precondition-safety step by step and goal satisfaction at the end."""
    from . import strips

    state = problem.init
    for i, action in enumerate(plan_.steps):
        if not strips.applicable(state, action):
            missing = strips.missing_preconditions(state, action)
            return ValidationResult(False, i, f"step {i}: missing {missing[0]}")
        state = strips.apply(state, action)
    if not problem.goal <= state:
        unmet = sorted(problem.goal - state)
        return ValidationResult(False, len(plan_.steps), f"goal atom {unmet[0]} unmet")
    return ValidationResult(True)


# ---------------------------------------------------------------------------
# worst-case distinctiveness: longest shared optimal-plan prefix


def wcd(
    problem: Problem,
    goal_a: frozenset,
    goal_b: frozenset,
    budget: Optional[SearchBudget] = None,
) -> int:
    """Length of the longest common prefix over all pairs of optimal plans
    for the two goals from the problem's initial state.

    Supported for models whose zero-cost actions are pure self-loops (the
    solo no-op); raises BudgetExhaustedError when the enumeration budget is
    spent.
    """
    budget = budget or SearchBudget(max_nodes=2_000_000, max_ms=120_000.0)
    comp = compiled(problem)
    for action in comp.actions:
        if action.cost == 0 and (action.add or action.dele):
            raise ModelError(
                "wcd needs positive costs for state-changing actions "
                f"({action.uid} is a zero-cost state change)"
            )

    tracker = _BudgetTracker(budget)
    cost_cache: dict = {}

    def opt_cost(mask: int, goal: frozenset, goal_mask: int):
        key = (mask, goal_mask)
        if key in cost_cache:
            return cost_cache[key]
        sub = problem.with_init(comp.mask_state(mask)).with_goal(goal)
        remaining = budget.max_nodes - tracker.expanded
        if remaining <= 0:
            raise BudgetExhaustedError("wcd enumeration budget spent")
        outcome = plan(sub, "optimal", SearchBudget(remaining, budget.max_ms))
        tracker.expanded += outcome.expanded
        if outcome.exhausted:
            raise BudgetExhaustedError("wcd enumeration budget spent")
        value = outcome.plan.cost if outcome.solved else INF
        cost_cache[key] = value
        return value

    goal_mask_a, _ = comp.goal_info(goal_a)
    goal_mask_b, _ = comp.goal_info(goal_b)
    c_a = opt_cost(comp.init_mask, goal_a, goal_mask_a)
    c_b = opt_cost(comp.init_mask, goal_b, goal_mask_b)
    if c_a is INF or c_b is INF:
        raise ModelError("wcd requires both goals to be solvable")

    level = {(comp.init_mask, 0)}
    depth = 0
    while True:
        nxt = set()
        for mask, g in level:
            for idx, s2, cost in _successors(comp, mask, frozenset()):
                if cost == 0 and s2 == mask:
                    continue  # solo pass: never part of an optimal plan
                g2 = g + cost
                if g2 + opt_cost(s2, goal_a, goal_mask_a) != c_a:
                    continue
                if g2 + opt_cost(s2, goal_b, goal_mask_b) != c_b:
                    continue
                nxt.add((s2, g2))
        if not nxt:
            return depth
        depth += 1
        level = nxt
