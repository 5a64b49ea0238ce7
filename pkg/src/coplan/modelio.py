"""Model text I/O: domain/problem parsing, Block Words generation, session logs.

The domain dialect is a small s-expression language (documented in the
README): a domain declares types, predicates, action schemas with
:pre/:add/:del/:cost, and at-most-one mutex templates; a problem declares
typed objects, the actor turn order, the initial state, and a conjunctive
goal.  Grounding instantiates schemas over the declared objects and, when
two or more actors are declared, injects turn-bookkeeping atoms so that
every action (including no-op) passes the turn to the next actor.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, TextIO

from .errors import ModelError, ParseError, ValidationError
from .strips import (
    COST_UNIT,
    Atom,
    GroundAction,
    MutexGroup,
    Problem,
    turn_atom,
)

# ---------------------------------------------------------------------------
# s-expression reader


@dataclass
class Node:
    """Either a symbol (value set) or a list (children set)."""

    line: int
    column: int
    value: Optional[str] = None
    children: Optional[list] = None

    @property
    def is_symbol(self) -> bool:
        return self.value is not None


def _tokenize(text: str):
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            yield (ch, line, col)
            col += 1
            i += 1
        else:
            start = i
            start_col = col
            while i < n and text[i] not in " \t\r\n();":
                i += 1
                col += 1
            yield (text[start:i], line, start_col)
    yield (None, line, col)


def read_sexprs(text: str) -> list:
    """Parse text into a list of top-level Nodes."""
    stack: list[list] = [[]]
    positions: list[tuple[int, int]] = []
    for token, line, col in _tokenize(text):
        if token is None:
            if len(stack) > 1:
                oline, ocol = positions[-1]
                raise ParseError("unclosed '('", oline, ocol)
            break
        if token == "(":
            stack.append([])
            positions.append((line, col))
        elif token == ")":
            if len(stack) == 1:
                raise ParseError("unmatched ')'", line, col)
            children = stack.pop()
            oline, ocol = positions.pop()
            stack[-1].append(Node(oline, ocol, children=children))
        else:
            stack[-1].append(Node(line, col, value=token))
    return stack[0]


def _sym(node: Node, what: str) -> str:
    if not node.is_symbol:
        raise ParseError(f"expected {what}, found a list", node.line, node.column)
    return node.value


def _lst(node: Node, what: str) -> list:
    if node.is_symbol:
        raise ParseError(f"expected {what}, found {node.value!r}", node.line, node.column)
    return node.children


# ---------------------------------------------------------------------------
# domain / problem structures


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    param_types: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.param_types)


@dataclass(frozen=True)
class LiftedAtom:
    predicate: str
    args: tuple[str, ...]  # variables (?x) or object constants


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: tuple[tuple[str, str], ...]  # (variable, type)
    actor_var: Optional[str]
    pre: tuple[LiftedAtom, ...]
    add: tuple[LiftedAtom, ...]
    dele: tuple[LiftedAtom, ...]
    neq: tuple[tuple[str, str], ...] = ()
    cost: int = COST_UNIT


@dataclass(frozen=True)
class MutexTemplate:
    predicate: str
    var_pos: int


@dataclass(frozen=True)
class Domain:
    name: str
    types: tuple[str, ...]
    predicates: tuple[PredicateDecl, ...]
    schemas: tuple[ActionSchema, ...]
    mutexes: tuple[MutexTemplate, ...]

    def predicate(self, name: str) -> PredicateDecl:
        for p in self.predicates:
            if p.name == name:
                return p
        raise ModelError(f"undeclared predicate: {name}")


@dataclass(frozen=True)
class ProblemDef:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]  # (name, type)
    actors: tuple[str, ...]
    init: tuple[Atom, ...]
    goal: tuple[Atom, ...]


# ---------------------------------------------------------------------------
# parsing


def _parse_typed_vars(nodes: list, what: str) -> tuple[tuple[str, str], ...]:
    """Parse "?x - type ?y - type ..." sequences."""
    out = []
    i = 0
    while i < len(nodes):
        var = _sym(nodes[i], f"{what} variable")
        if i + 2 >= len(nodes) or _sym(nodes[i + 1], "'-'") != "-":
            raise ParseError(f"expected '- <type>' after {var}", nodes[i].line, nodes[i].column)
        typ = _sym(nodes[i + 2], "type name")
        out.append((var, typ))
        i += 3
    return tuple(out)


def _parse_lifted_atom(node: Node) -> LiftedAtom:
    parts = _lst(node, "atom")
    if not parts:
        raise ParseError("empty atom", node.line, node.column)
    pred = _sym(parts[0], "predicate name")
    args = tuple(_sym(p, "atom argument") for p in parts[1:])
    return LiftedAtom(pred, args)


def _check_lifted(domain_preds: dict, atom: LiftedAtom, bound_vars: dict, node: Node, schema: str):
    decl = domain_preds.get(atom.predicate)
    if decl is None:
        raise ParseError(
            f"undeclared predicate {atom.predicate!r} in action {schema}", node.line, node.column
        )
    if len(atom.args) != decl.arity:
        raise ParseError(
            f"predicate {atom.predicate!r} expects {decl.arity} args, got {len(atom.args)}",
            node.line,
            node.column,
        )
    for arg, typ in zip(atom.args, decl.param_types):
        if arg.startswith("?"):
            if arg not in bound_vars:
                raise ParseError(
                    f"unbound variable {arg} in action {schema}", node.line, node.column
                )
            if bound_vars[arg] != typ:
                raise ParseError(
                    f"variable {arg} has type {bound_vars[arg]}, predicate "
                    f"{atom.predicate!r} expects {typ}",
                    node.line,
                    node.column,
                )


def parse_domain(text: str) -> Domain:
    """Parse a domain definition; deterministic, position-annotated errors."""
    tops = read_sexprs(text)
    if len(tops) != 1:
        raise ParseError("expected exactly one (domain ...) form", 1, 1)
    form = _lst(tops[0], "(domain ...)")
    if not form or _sym(form[0], "keyword") != "domain":
        raise ParseError("expected (domain <name> ...)", tops[0].line, tops[0].column)
    name = _sym(form[1], "domain name")

    types: tuple[str, ...] = ()
    predicates: list[PredicateDecl] = []
    schemas: list[ActionSchema] = []
    mutexes: list[MutexTemplate] = []

    for section in form[2:]:
        parts = _lst(section, "domain section")
        head = _sym(parts[0], "section keyword")
        if head == ":types":
            types = tuple(_sym(p, "type name") for p in parts[1:])
        elif head == ":predicates":
            for pnode in parts[1:]:
                decl = _lst(pnode, "predicate declaration")
                pname = _sym(decl[0], "predicate name")
                params = _parse_typed_vars(decl[1:], "predicate")
                for _, typ in params:
                    if typ not in types:
                        raise ParseError(f"undeclared type {typ!r}", pnode.line, pnode.column)
                predicates.append(PredicateDecl(pname, tuple(t for _, t in params)))
        elif head == ":action":
            schemas.append(_parse_action(parts, {p.name: p for p in predicates}, types, section))
        elif head == ":mutex":
            mutexes.append(_parse_mutex(parts, {p.name: p for p in predicates}, section))
        else:
            raise ParseError(f"unknown domain section {head!r}", section.line, section.column)

    return Domain(name, types, tuple(predicates), tuple(schemas), tuple(mutexes))


def _parse_action(parts: list, preds: dict, types: tuple, section: Node) -> ActionSchema:
    name = _sym(parts[1], "action name")
    fields = {}
    i = 2
    while i < len(parts):
        key = _sym(parts[i], "action keyword")
        if i + 1 >= len(parts):
            raise ParseError(f"missing value for {key}", parts[i].line, parts[i].column)
        fields[key] = parts[i + 1]
        i += 2
    for required in (":params", ":pre", ":add", ":del"):
        if required not in fields:
            raise ParseError(f"action {name} is missing {required}", section.line, section.column)

    params = _parse_typed_vars(_lst(fields[":params"], ":params"), "parameter")
    for _, typ in params:
        if typ not in types:
            raise ParseError(f"undeclared type {typ!r}", fields[":params"].line, fields[":params"].column)
    bound = dict(params)

    actor_var = None
    if ":actor" in fields:
        actor_var = _sym(fields[":actor"], ":actor variable")
        if actor_var not in bound:
            raise ParseError(
                f"action {name}: :actor {actor_var} is not a parameter",
                fields[":actor"].line,
                fields[":actor"].column,
            )

    def parse_atom_list(key: str) -> tuple[LiftedAtom, ...]:
        out = []
        for anode in _lst(fields[key], key):
            atom = _parse_lifted_atom(anode)
            _check_lifted(preds, atom, bound, anode, name)
            out.append(atom)
        return tuple(out)

    neq = ()
    if ":neq" in fields:
        pairs = _lst(fields[":neq"], ":neq")
        if pairs and pairs[0].is_symbol:  # single pair: (?x ?y)
            pairs = [fields[":neq"]]
        neq = tuple(
            (_sym(_lst(p, ":neq pair")[0], "var"), _sym(_lst(p, ":neq pair")[1], "var"))
            for p in pairs
        )

    cost = COST_UNIT
    if ":cost" in fields:
        raw = _sym(fields[":cost"], ":cost value")
        try:
            cost = int(raw)
        except ValueError:
            raise ParseError(f"bad :cost {raw!r}", fields[":cost"].line, fields[":cost"].column)

    return ActionSchema(
        name=name,
        params=params,
        actor_var=actor_var,
        pre=parse_atom_list(":pre"),
        add=parse_atom_list(":add"),
        dele=parse_atom_list(":del"),
        neq=neq,
        cost=cost,
    )


def _parse_mutex(parts: list, preds: dict, section: Node) -> MutexTemplate:
    if len(parts) != 2:
        raise ParseError("mutex expects one (pred ... * ...) template", section.line, section.column)
    tmpl = _lst(parts[1], "mutex template")
    pred = _sym(tmpl[0], "predicate name")
    decl = preds.get(pred)
    if decl is None:
        raise ParseError(f"undeclared predicate {pred!r} in mutex", section.line, section.column)
    args = [_sym(a, "mutex argument") for a in tmpl[1:]]
    if len(args) != decl.arity:
        raise ParseError(
            f"mutex template arity {len(args)} != predicate arity {decl.arity}",
            section.line,
            section.column,
        )
    stars = [i for i, a in enumerate(args) if a == "*"]
    if len(stars) != 1:
        raise ParseError("mutex template needs exactly one '*' position", section.line, section.column)
    return MutexTemplate(pred, stars[0])


def parse_problem(text: str) -> ProblemDef:
    tops = read_sexprs(text)
    if len(tops) != 1:
        raise ParseError("expected exactly one (problem ...) form", 1, 1)
    form = _lst(tops[0], "(problem ...)")
    if not form or _sym(form[0], "keyword") != "problem":
        raise ParseError("expected (problem <name> ...)", tops[0].line, tops[0].column)
    name = _sym(form[1], "problem name")

    domain_name = ""
    objects: list[tuple[str, str]] = []
    actors: tuple[str, ...] = ()
    init: list[Atom] = []
    goal: list[Atom] = []

    def ground_atoms(nodes: list) -> list[Atom]:
        out = []
        for anode in nodes:
            parts = _lst(anode, "atom")
            pred = _sym(parts[0], "predicate name")
            args = tuple(_sym(p, "object name") for p in parts[1:])
            out.append(Atom(pred, args))
        return out

    for section in form[2:]:
        parts = _lst(section, "problem section")
        head = _sym(parts[0], "section keyword")
        if head == ":domain":
            domain_name = _sym(parts[1], "domain name")
        elif head == ":objects":
            for group in parts[1:]:
                items = [_sym(x, "object") for x in _lst(group, "object group")]
                if len(items) < 2:
                    raise ParseError("object group needs (type name...)", group.line, group.column)
                typ = items[0]
                objects.extend((obj, typ) for obj in items[1:])
        elif head == ":actors":
            actors = tuple(_sym(p, "actor name") for p in parts[1:])
        elif head == ":init":
            init = ground_atoms(parts[1:])
        elif head == ":goal":
            goal = ground_atoms(parts[1:])
        else:
            raise ParseError(f"unknown problem section {head!r}", section.line, section.column)

    if not domain_name:
        raise ParseError("problem is missing (:domain <name>)", tops[0].line, tops[0].column)
    return ProblemDef(name, domain_name, tuple(objects), actors, tuple(init), tuple(goal))


# ---------------------------------------------------------------------------
# pretty-printing (canonical form; parse . print . parse == parse)


def print_domain(domain: Domain) -> str:
    lines = [f"(domain {domain.name}"]
    lines.append(f"  (:types {' '.join(domain.types)})")
    lines.append("  (:predicates")
    for p in domain.predicates:
        params = " ".join(f"?x{i} - {t}" for i, t in enumerate(p.param_types))
        lines.append(f"    ({p.name}{' ' + params if params else ''})")
    lines.append("  )")
    for s in domain.schemas:
        params = " ".join(f"{v} - {t}" for v, t in s.params)
        lines.append(f"  (:action {s.name}")
        lines.append(f"    :params ({params})")
        if s.actor_var:
            lines.append(f"    :actor {s.actor_var}")
        if s.neq:
            pairs = " ".join(f"({a} {b})" for a, b in s.neq)
            lines.append(f"    :neq ({pairs})")
        for key, atoms_ in ((":pre", s.pre), (":add", s.add), (":del", s.dele)):
            body = " ".join(f"({a.predicate}{''.join(' ' + x for x in a.args)})" for a in atoms_)
            lines.append(f"    {key} ({body})")
        lines.append(f"    :cost {s.cost})")
    for m in domain.mutexes:
        decl = domain.predicate(m.predicate)
        args = ["*" if i == m.var_pos else f"?x{i}" for i in range(decl.arity)]
        lines.append(f"  (:mutex ({m.predicate} {' '.join(args)}))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def print_problem(pd: ProblemDef) -> str:
    lines = [f"(problem {pd.name}", f"  (:domain {pd.domain_name})"]
    by_type: dict[str, list[str]] = {}
    for obj, typ in pd.objects:
        by_type.setdefault(typ, []).append(obj)
    groups = " ".join(f"({typ} {' '.join(objs)})" for typ, objs in by_type.items())
    lines.append(f"  (:objects {groups})")
    if pd.actors:
        lines.append(f"  (:actors {' '.join(pd.actors)})")
    for key, atoms_ in ((":init", pd.init), (":goal", pd.goal)):
        body = " ".join(f"({a.predicate}{''.join(' ' + x for x in a.args)})" for a in atoms_)
        lines.append(f"  ({key} {body})")
    lines.append(")")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# grounding


def _bindings(params: tuple, objects_by_type: dict, neq: tuple):
    if not params:
        yield {}
        return
    (var, typ), rest = params[0], params[1:]
    for obj in objects_by_type.get(typ, ()):
        for binding in _bindings(rest, objects_by_type, neq):
            binding = {var: obj, **binding}
            yield binding


def _instantiate(atoms_: tuple, binding: dict) -> frozenset:
    out = []
    for a in atoms_:
        args = tuple(binding.get(x, x) for x in a.args)
        out.append(Atom(a.predicate, args))
    return frozenset(out)


def ground(domain: Domain, pd: ProblemDef) -> Problem:
    """Instantiate a domain over a problem's objects into a ground Problem."""
    if pd.domain_name != domain.name:
        raise ModelError(f"problem wants domain {pd.domain_name!r}, got {domain.name!r}")
    objects_by_type: dict[str, list[str]] = {}
    seen = set()
    for obj, typ in pd.objects:
        if typ not in domain.types:
            raise ModelError(f"object {obj} has undeclared type {typ}")
        if obj in seen:
            raise ModelError(f"duplicate object {obj}")
        seen.add(obj)
        objects_by_type.setdefault(typ, []).append(obj)
    for actor in pd.actors:
        if actor not in seen:
            raise ModelError(f"actor {actor} is not a declared object")

    obj_type = dict(pd.objects)
    preds = {p.name: p for p in domain.predicates}

    def check_ground_atom(atom: Atom, where: str):
        decl = preds.get(atom.predicate)
        if decl is None:
            raise ModelError(f"undeclared predicate {atom.predicate!r} in {where}")
        if len(atom.args) != decl.arity:
            raise ModelError(f"{atom} has wrong arity for {atom.predicate!r} in {where}")
        for arg, typ in zip(atom.args, decl.param_types):
            if arg not in obj_type:
                raise ModelError(f"unknown object {arg!r} in {where} atom {atom}")
            if obj_type[arg] != typ:
                raise ModelError(f"object {arg} has type {obj_type[arg]}, expected {typ} in {where}")

    for a in pd.init:
        check_ground_atom(a, "init")
    for a in pd.goal:
        check_ground_atom(a, "goal")

    multi_actor = len(pd.actors) >= 2
    next_actor = {}
    if pd.actors:
        for i, actor in enumerate(pd.actors):
            next_actor[actor] = pd.actors[(i + 1) % len(pd.actors)]

    actions = []
    for schema in domain.schemas:
        for binding in _bindings(schema.params, objects_by_type, schema.neq):
            if any(binding[a] == binding[b] for a, b in schema.neq):
                continue
            actor = binding[schema.actor_var] if schema.actor_var else ""
            pre = _instantiate(schema.pre, binding)
            add = _instantiate(schema.add, binding)
            dele = _instantiate(schema.dele, binding)
            if pd.actors and actor:
                pre = pre | {turn_atom(actor)}
                if multi_actor:
                    add = add | {turn_atom(next_actor[actor])}
                    dele = dele | {turn_atom(actor)}
            args = tuple(binding[v] for v, _ in schema.params)
            if add & dele:
                raise ModelError(
                    f"schema {schema.name} grounds to overlapping add/del for args {args}; "
                    "add a :neq constraint"
                )
            actions.append(
                GroundAction(schema.name, args, actor, pre, add, dele, schema.cost)
            )

    mutex_groups = []
    for m in domain.mutexes:
        decl = preds[m.predicate]
        var_type = decl.param_types[m.var_pos]
        if len(objects_by_type.get(var_type, ())) < 2:
            continue  # degenerate template: instantiations would have < 2 atoms
        mutex_groups.append(MutexGroup(m.predicate, decl.arity, m.var_pos))

    init = frozenset(pd.init)
    if pd.actors and not any(a.predicate == "turn" for a in init):
        init = init | {turn_atom(pd.actors[0])}

    return Problem(
        name=pd.name,
        objects=tuple(pd.objects),
        actions=tuple(actions),
        init=init,
        goal=frozenset(pd.goal),
        mutex_groups=tuple(mutex_groups),
        actors=pd.actors,
    )


# ---------------------------------------------------------------------------
# Block Words


@dataclass(frozen=True)
class BlockWordsSpec:
    """Initial stacks (bottom-to-top), candidate words, and actors."""

    stacks: tuple[tuple[str, ...], ...]
    words: tuple[str, ...]
    actors: tuple[str, ...] = ("user", "agent")

    def __post_init__(self):
        object.__setattr__(self, "stacks", tuple(tuple(s) for s in self.stacks))
        object.__setattr__(self, "words", tuple(self.words))
        object.__setattr__(self, "actors", tuple(self.actors))
        letters = [b for stack in self.stacks for b in stack]
        if len(letters) != len(set(letters)):
            raise ValidationError("block letters must be unique across stacks")
        if not self.actors:
            raise ValidationError("at least one actor is required")
        for word in self.words:
            missing = sorted(set(word) - set(letters))
            if missing:
                raise ValidationError(f"word {word!r} uses missing letters: {missing}")
            if len(word) < 2:
                raise ValidationError(f"word {word!r} is too short to form a stack")
            if len(set(word)) != len(word):
                raise ValidationError(f"word {word!r} repeats a letter; it cannot be stacked")

    @property
    def blocks(self) -> tuple[str, ...]:
        return tuple(b for stack in self.stacks for b in stack)


def figure_layout_spec() -> BlockWordsSpec:
    """The built-in demo layout: ten stacks, six candidate words."""
    return BlockWordsSpec(
        stacks=(("t",), ("r", "e", "h"), ("l",), ("s",), ("m",), ("o",), ("f",), ("w",), ("b",), ("a",)),
        words=("father", "mother", "master", "faster", "later", "water"),
    )


def blockwords_domain() -> Domain:
    """The pick/place/stack/unstack/noop domain with one hand per actor."""
    b, a2 = "?x - block", None  # noqa: F841  (kept simple; schemas below)
    P = PredicateDecl
    predicates = (
        P("on", ("block", "block")),
        P("on-table", ("block",)),
        P("clear", ("block",)),
        P("holding", ("actor", "block")),
        P("handempty", ("actor",)),
        P("turn", ("actor",)),
    )
    A = LiftedAtom
    schemas = (
        ActionSchema(
            "pickup",
            params=(("?a", "actor"), ("?x", "block")),
            actor_var="?a",
            pre=(A("on-table", ("?x",)), A("clear", ("?x",)), A("handempty", ("?a",))),
            add=(A("holding", ("?a", "?x")),),
            dele=(A("on-table", ("?x",)), A("clear", ("?x",)), A("handempty", ("?a",))),
        ),
        ActionSchema(
            "putdown",
            params=(("?a", "actor"), ("?x", "block")),
            actor_var="?a",
            pre=(A("holding", ("?a", "?x")),),
            add=(A("on-table", ("?x",)), A("clear", ("?x",)), A("handempty", ("?a",))),
            dele=(A("holding", ("?a", "?x")),),
        ),
        ActionSchema(
            "stack",
            params=(("?a", "actor"), ("?x", "block"), ("?y", "block")),
            actor_var="?a",
            neq=(("?x", "?y"),),
            pre=(A("holding", ("?a", "?x")), A("clear", ("?y",))),
            add=(A("on", ("?x", "?y")), A("clear", ("?x",)), A("handempty", ("?a",))),
            dele=(A("holding", ("?a", "?x")), A("clear", ("?y",))),
        ),
        ActionSchema(
            "unstack",
            params=(("?a", "actor"), ("?x", "block"), ("?y", "block")),
            actor_var="?a",
            neq=(("?x", "?y"),),
            pre=(A("on", ("?x", "?y")), A("clear", ("?x",)), A("handempty", ("?a",))),
            add=(A("holding", ("?a", "?x")), A("clear", ("?y",))),
            dele=(A("on", ("?x", "?y")), A("clear", ("?x",)), A("handempty", ("?a",))),
        ),
        ActionSchema(
            "noop",
            params=(("?a", "actor"),),
            actor_var="?a",
            pre=(),
            add=(),
            dele=(),
            cost=0,
        ),
    )
    mutexes = (
        MutexTemplate("on", 0),  # at most one x with on(x,y), per y
        MutexTemplate("on", 1),  # x sits on at most one y
        MutexTemplate("holding", 1),  # one block per hand
    )
    return Domain("block-words", ("block", "actor"), predicates, schemas, mutexes)


def word_goal(word: str) -> frozenset:
    """Goal chain for a word read top-to-bottom: on(l1,l2) ... on(l(n-1),ln)."""
    return frozenset(Atom("on", (x, y)) for x, y in zip(word, word[1:]))


def blockwords_problem_def(spec: BlockWordsSpec, goal: Iterable = ()) -> ProblemDef:
    init = []
    for stack in spec.stacks:
        init.append(Atom("on-table", (stack[0],)))
        for below, above in zip(stack, stack[1:]):
            init.append(Atom("on", (above, below)))
        init.append(Atom("clear", (stack[-1],)))
    for actor in spec.actors:
        init.append(Atom("handempty", (actor,)))
    objects = tuple((b, "block") for b in spec.blocks) + tuple((a, "actor") for a in spec.actors)
    return ProblemDef(
        name="block-words-game",
        domain_name="block-words",
        objects=objects,
        actors=spec.actors,
        init=tuple(init),
        goal=tuple(sorted(goal)),
    )


def make_blockwords(spec: BlockWordsSpec) -> tuple[Problem, list]:
    """Ground the demo game: returns the problem and one goal per word."""
    problem = ground(blockwords_domain(), blockwords_problem_def(spec))
    return problem, [word_goal(w) for w in spec.words]


# ---------------------------------------------------------------------------
# session logs: line-delimited JSON with a schema header on line 1

LOG_SCHEMA = "coplan.session-log/1"
LOG_FIELDS = ("turn", "actor", "action", "digest", "posterior", "intermediate", "verdict", "ts")


def state_digest(state: frozenset) -> str:
    text = "|".join(sorted(str(a) for a in state))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class LogRecord:
    turn: int
    actor: str
    action: str  # ground action uid
    digest: str  # digest of the post-action world state
    posterior: Optional[dict] = None
    intermediate: Optional[dict] = None
    verdict: Optional[dict] = None
    ts: float = 0.0

    def to_json(self) -> str:
        payload = {k: getattr(self, k) for k in LOG_FIELDS}
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(line: str, lineno: int) -> "LogRecord":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed log record: {exc.msg}", lineno, exc.colno)
        missing = [k for k in LOG_FIELDS if k not in payload]
        if missing:
            raise ParseError(f"log record missing fields {missing}", lineno, 1)
        return LogRecord(**{k: payload[k] for k in LOG_FIELDS})


def log_header(config: dict) -> dict:
    return {"schema": LOG_SCHEMA, "fields": list(LOG_FIELDS), "config": config}


def write_log(path, header: dict, records: Iterable) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_log_to(fh, header, records)


def write_log_to(fh: TextIO, header: dict, records: Iterable) -> None:
    fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
    for rec in records:
        fh.write(rec.to_json() + "\n")


def append_record(fh: TextIO, record: LogRecord) -> None:
    fh.write(record.to_json() + "\n")
    fh.flush()


def read_log(path) -> tuple[dict, list]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty log file: missing schema header", 1, 1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed log header: {exc.msg}", 1, exc.colno)
    if header.get("schema") != LOG_SCHEMA:
        raise ParseError(f"unsupported log schema {header.get('schema')!r}", 1, 1)
    records = []
    last_turn = 0
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        rec = LogRecord.from_json(line, lineno)
        if rec.turn <= last_turn:
            raise ParseError(
                f"turn indices must be strictly increasing (got {rec.turn} after {last_turn})",
                lineno,
                1,
            )
        last_turn = rec.turn
        records.append(rec)
    return header, records
