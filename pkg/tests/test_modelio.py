import json

import pytest

from coplan.errors import ParseError, ValidationError
from coplan.modelio import (
    BlockWordsSpec,
    LogRecord,
    blockwords_domain,
    blockwords_problem_def,
    figure_layout_spec,
    ground,
    log_header,
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
from coplan.strips import Atom, atoms, goal_conflicts


def test_figure_layout_initial_atoms(demo):
    problem, _ = demo
    for present in ("on(h,e)", "on(e,r)", "on-table(r)", "on-table(t)", "clear(h)", "clear(t)"):
        assert Atom.parse(present) in problem.init
    assert Atom.parse("turn(user)") in problem.init
    assert len([a for a in problem.init if a.predicate == "on-table"]) == 10


def test_word_goal_chain_encoding():
    assert word_goal("father") == atoms("on(f,a)", "on(a,t)", "on(t,h)", "on(h,e)", "on(e,r)")
    assert word_goal("ab") == atoms("on(a,b)")


def test_six_goals_with_expected_sizes(demo_spec, demo):
    problem, goals = demo
    sizes = {word: len(goals[word]) for word in demo_spec.words}
    assert sizes == {
        "father": 5,
        "mother": 5,
        "master": 5,
        "faster": 5,
        "later": 4,
        "water": 4,
    }
    for goal in goals.values():
        assert goal_conflicts(goal, problem.mutex_groups) == []


def test_minimal_two_block_game():
    spec = BlockWordsSpec(stacks=(("a",), ("b",)), words=("ab",), actors=("user",))
    problem, goals = make_blockwords(spec)
    assert goals == [atoms("on(a,b)")]
    assert Atom.parse("handempty(user)") in problem.init


def test_spec_validation_errors():
    with pytest.raises(ValidationError):  # word uses a missing letter
        BlockWordsSpec(stacks=(("a",), ("b",)), words=("abc",))
    with pytest.raises(ValidationError):  # duplicate letters across stacks
        BlockWordsSpec(stacks=(("a",), ("a",)), words=("aa",))
    with pytest.raises(ValidationError):  # repeated letter in a word
        BlockWordsSpec(stacks=(("a",), ("b",), ("c",)), words=("aba",))
    with pytest.raises(ValidationError):  # no actors
        BlockWordsSpec(stacks=(("a",), ("b",)), words=("ab",), actors=())


def test_parsed_domain_matches_programmatic(demo):
    problem, _ = demo
    domain_text = print_domain(blockwords_domain())
    problem_text = print_problem(blockwords_problem_def(figure_layout_spec()))
    reparsed = ground(parse_domain(domain_text), parse_problem(problem_text))
    assert reparsed == problem


def test_parse_error_positions():
    with pytest.raises(ParseError) as err:
        parse_domain("(domain x\n  (:types t)\n  (:predicates (p ?x - t)\n)")
    assert err.value.line in (1, 3)  # the unclosed form is reported where it opened
    with pytest.raises(ParseError) as err:
        parse_domain("(domain x (:types t) (:junk))")
    assert "junk" in str(err.value)


def test_semantic_error_undeclared_predicate():
    text = """
(domain bad
  (:types t)
  (:predicates (p ?x - t))
  (:action go
    :params (?x - t)
    :pre ((q ?x))
    :add ((p ?x))
    :del ()
    :cost 1000))
"""
    with pytest.raises(ParseError) as err:
        parse_domain(text)
    assert "q" in str(err.value)


def test_semantic_error_arity_and_unbound():
    base = """
(domain bad
  (:types t)
  (:predicates (p ?x - t))
  (:action go
    :params (?x - t)
    :pre ((p ?x ?x))
    :add ()
    :del ()
    :cost 1000))
"""
    with pytest.raises(ParseError):
        parse_domain(base)
    with pytest.raises(ParseError):
        parse_domain(base.replace("(p ?x ?x)", "(p ?y)"))


def _toy_domain_text(i: int) -> str:
    return f"""
(domain toy{i}
  (:types thing place)
  (:predicates (at{i} ?x - thing ?p - place) (free ?p - place) (grabbed ?x - thing))
  (:action move{i}
    :params (?x - thing ?a - place ?b - place)
    :neq ((?a ?b))
    :pre ((at{i} ?x ?a) (free ?b))
    :add ((at{i} ?x ?b) (free ?a))
    :del ((at{i} ?x ?a) (free ?b))
    :cost {1000 + i})
  (:action grab{i}
    :params (?x - thing ?a - place)
    :pre ((at{i} ?x ?a))
    :add ((grabbed ?x))
    :del ()
    :cost 0)
  (:mutex (at{i} ?x *)))
"""


def test_parser_roundtrip_corpus():
    corpus = [print_domain(blockwords_domain())] + [_toy_domain_text(i) for i in range(9)]
    assert len(corpus) >= 10
    for text in corpus:
        first = parse_domain(text)
        printed = print_domain(first)
        assert parse_domain(printed) == first
        assert print_domain(parse_domain(printed)) == printed


def test_problem_roundtrip():
    pd = blockwords_problem_def(figure_layout_spec(), goal=word_goal("later"))
    assert parse_problem(print_problem(pd)) == pd


def test_grounding_rejects_bad_problems():
    import dataclasses

    from coplan.errors import ModelError

    domain = blockwords_domain()
    pd = blockwords_problem_def(figure_layout_spec())
    bad = dataclasses.replace(pd, init=pd.init + (Atom("on", ("t", "zz")),))
    with pytest.raises(ModelError):
        ground(domain, bad)
    bad = dataclasses.replace(pd, goal=(Atom("on", ("t",)),))
    with pytest.raises(ModelError):
        ground(domain, bad)
    bad = dataclasses.replace(pd, objects=pd.objects + (("t", "block"),))
    with pytest.raises(ModelError):
        ground(domain, bad)


def test_turn_injection_multi_vs_single_actor():
    spec = figure_layout_spec()
    two, _ = make_blockwords(spec)
    one, _ = make_blockwords(BlockWordsSpec(stacks=spec.stacks, words=spec.words, actors=("user",)))
    pickup_two = two.action("pickup(user,t)")
    assert Atom.parse("turn(user)") in pickup_two.pre
    assert Atom.parse("turn(agent)") in pickup_two.add
    assert Atom.parse("turn(user)") in pickup_two.dele
    pickup_one = one.action("pickup(user,t)")
    assert Atom.parse("turn(user)") in pickup_one.pre
    assert not any(a.predicate == "turn" for a in pickup_one.add | pickup_one.dele)


def test_log_roundtrip(tmp_path):
    header = log_header({"demo": True})
    records = [
        LogRecord(turn=i, actor="user" if i % 2 else "agent", action=f"noop(user)",
                  digest=f"d{i}", posterior={"probs": {"father": 0.5}}, intermediate=None,
                  verdict=None, ts=1.5 + i)
        for i in range(1, 4)
    ]
    path = tmp_path / "session.log"
    write_log(path, header, records)
    got_header, got_records = read_log(path)
    assert got_header == header
    assert got_records == records
    assert [r.turn for r in got_records] == [1, 2, 3]


def test_log_empty_session(tmp_path):
    path = tmp_path / "empty.log"
    write_log(path, log_header({}), [])
    header, records = read_log(path)
    assert records == []
    assert header["schema"].startswith("coplan.session-log/")


def test_log_malformed_line_reports_lineno(tmp_path):
    path = tmp_path / "bad.log"
    with open(path, "w") as fh:
        fh.write(json.dumps(log_header({})) + "\n")
        fh.write("{not json}\n")
    with pytest.raises(ParseError) as err:
        read_log(path)
    assert err.value.line == 2


def test_log_rejects_nonincreasing_turns(tmp_path):
    path = tmp_path / "order.log"
    rec = LogRecord(turn=1, actor="user", action="noop(user)", digest="d", ts=0.0)
    with open(path, "w") as fh:
        fh.write(json.dumps(log_header({})) + "\n")
        fh.write(rec.to_json() + "\n")
        fh.write(rec.to_json() + "\n")
    with pytest.raises(ParseError) as err:
        read_log(path)
    assert err.value.line == 3


def test_state_digest_is_content_addressed(demo):
    problem, _ = demo
    assert state_digest(problem.init) == state_digest(frozenset(problem.init))
    assert state_digest(problem.init) != state_digest(problem.init - {Atom.parse("clear(t)")})
