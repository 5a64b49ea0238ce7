import json
import random

import pytest

from coplan.errors import (
    DigestMismatchError,
    PreconditionError,
    TurnError,
    ValidationError,
)
from coplan.modelio import read_log, write_log
from coplan.planner import SearchBudget
from coplan.recognition import GoalHypothesis
from coplan.session import MATCH, MISMATCH, NO_PREDICTION, Session, SessionConfig, replay_log
from coplan.strips import Atom, apply


import dataclasses


def single_goal_config(**kwargs):
    """father is the only hypothesis: the agent's behavior is fully scripted."""
    config = SessionConfig.blockwords(**kwargs)
    father = next(h for h in config.hypotheses if h.label == "father")
    return dataclasses.replace(
        config, hypotheses=(GoalHypothesis("father", father.goal, 1.0),)
    )


def test_create_session_demo(demo):
    config = SessionConfig.blockwords(tau=0.5, head_start=2)
    session = Session(config)
    assert len(config.hypotheses) == 6
    assert session.turn_owner == "user"
    assert session.posterior.as_dict() == {h.label: pytest.approx(1 / 6) for h in config.hypotheses}
    assert session.is_terminal() == (False, ())


def test_session_config_validation():
    with pytest.raises(ValidationError):
        SessionConfig.blockwords(tau=1.5)
    with pytest.raises(ValidationError):
        SessionConfig.blockwords(beta=0.0)
    with pytest.raises(ValidationError):
        SessionConfig.blockwords(head_start=-1)
    with pytest.raises(ValidationError):
        SessionConfig.blockwords(true_goal="nonsense")


def test_zero_head_start_agent_engages_immediately():
    session = Session(single_goal_config(tau=0.5, head_start=0))
    session.submit_user_action("noop(user)")
    action, snap = session.agent_step()
    assert session.counters.recognition_calls == 1
    assert snap["decision"] == "planned"
    assert action.actor == "agent" and action.base_name != "noop"


def test_head_start_counts_substantive_user_actions():
    session = Session(single_goal_config(tau=0.5, head_start=2))
    session.submit_user_action("noop(user)")
    action, snap = session.agent_step()
    assert action.uid == "noop(agent)" and snap["decision"] == "head-start"
    session.submit_user_action("pickup(user,t)")
    action, snap = session.agent_step()
    assert action.uid == "noop(agent)" and snap["decision"] == "head-start"
    session.submit_user_action("stack(user,t,h)")
    action, snap = session.agent_step()
    assert snap["decision"] != "head-start"
    assert session.counters.recognition_calls == 1


def test_monitor_match_keeps_plan_and_skips_recognition():
    session = Session(single_goal_config(tau=0.5, head_start=0))
    session.submit_user_action("noop(user)")
    first, snap = session.agent_step()
    assert snap["predictedUser"] == "noop(user)"
    calls = session.counters.recognition_calls
    verdict = session.submit_user_action("noop(user)")
    assert verdict.kind == MATCH
    action, snap = session.agent_step()
    assert snap["decision"] == "plan-continue"
    assert session.counters.recognition_calls == calls  # reuse, no recomputation


def test_monitor_mismatch_discards_plan_and_recomputes():
    session = Session(single_goal_config(tau=0.5, head_start=0))
    session.submit_user_action("noop(user)")
    session.agent_step()
    calls = session.counters.recognition_calls
    verdict = session.submit_user_action("pickup(user,o)")
    assert verdict.kind == MISMATCH
    assert verdict.expected == "noop(user)"
    assert verdict.observed == "pickup(user,o)"
    assert session.active_plan is None
    _, snap = session.agent_step()
    assert session.counters.recognition_calls == calls + 1
    assert session.counters.mismatches == 1


def test_no_prediction_verdict():
    session = Session(single_goal_config(tau=0.5, head_start=3))
    verdict = session.submit_user_action("pickup(user,t)")
    assert verdict.kind == NO_PREDICTION


def test_rejects_inapplicable_action_unchanged_state(demo):
    session = Session(SessionConfig.blockwords())
    world = session.world
    with pytest.raises(PreconditionError) as err:
        session.submit_user_action("pickup(user,e)")
    assert Atom.parse("clear(e)") in err.value.missing
    assert session.world == world
    assert session.turn_owner == "user"
    assert session.observations == []


def test_rejects_out_of_turn_commands():
    session = Session(SessionConfig.blockwords())
    with pytest.raises(TurnError):
        session.agent_step()
    session.submit_user_action("pickup(user,t)")
    with pytest.raises(TurnError):
        session.submit_user_action("putdown(user,t)")
    with pytest.raises(TurnError):
        session.submit_user_action("noop(agent)")


def test_liveness_agent_always_acts():
    config = SessionConfig.blockwords(tau=0.2, head_start=0, fallback="noop",
                                      budget=SearchBudget(8_000, 60_000))
    session = Session(config)
    rng = random.Random(9)
    for _ in range(12):
        if session.terminal:
            break
        legal = [a for a in session.legal_actions() if a.base_name != "noop"]
        session.submit_user_action(rng.choice(sorted(legal, key=lambda a: a.uid)))
        if session.terminal:
            break
        action, _ = session.agent_step()
        assert action is not None and action.actor == "agent"


def observer_config(**kwargs):
    """tau=1.0 selects only universally shared (already true) atoms, so the
    agent always falls back to a pass: scripts can steer the board freely."""
    kwargs.setdefault("tau", 1.0)
    kwargs.setdefault("fallback", "noop")
    return SessionConfig.blockwords(**kwargs)


def test_world_equals_fold_of_observations():
    session = Session(observer_config(head_start=1))
    session.submit_user_action("pickup(user,t)")
    session.agent_step()
    session.submit_user_action("stack(user,t,h)")
    session.agent_step()
    state = session.config.problem.init
    for action in session.observations:
        state = apply(state, action)
    assert state == session.world
    assert [r.turn for r in session.records] == [1, 2, 3, 4]


def test_agent_actions_recorded_but_not_evidence():
    session = Session(single_goal_config(tau=0.5, head_start=0))
    session.submit_user_action("pickup(user,b)")
    action, _ = session.agent_step()
    assert action.base_name != "noop"
    assert session.observations[-1].actor == "agent"  # full history keeps it
    evidence = session.recognition_observations()
    assert all(a.actor == "user" for a in evidence)
    assert [a.uid for a in evidence] == ["pickup(user,b)"]


def test_terminal_when_word_completed():
    session = Session(observer_config())
    script = ["pickup(user,t)", "stack(user,t,h)", "pickup(user,a)", "stack(user,a,t)",
              "pickup(user,f)", "stack(user,f,a)"]
    for uid in script:
        session.submit_user_action(uid)
        if session.terminal:
            break
        session.agent_step()
    terminal, satisfied = session.is_terminal()
    assert terminal and "father" in satisfied
    with pytest.raises(TurnError):
        session.submit_user_action("noop(user)")


def test_quit_marks_terminal():
    session = Session(SessionConfig.blockwords())
    session.quit()
    assert session.is_terminal()[0]
    with pytest.raises(TurnError):
        session.submit_user_action("noop(user)")


def test_debug_snapshot_shape_and_log_roundtrip(tmp_path):
    session = Session(SessionConfig.blockwords(tau=0.5, head_start=0))
    snap = session.debug_snapshot()
    assert snap["posterior"]["probs"]["father"] == pytest.approx(1 / 6)
    assert snap["jointPlan"] is None
    session.submit_user_action("unstack(user,h,e)")
    session.agent_step()
    snap = session.debug_snapshot()
    assert set(snap["costs"]) == {"father", "mother", "master", "faster", "later", "water"}
    assert snap["costs"]["father"]["cComply"] is not None
    payload = json.loads(json.dumps(snap))
    assert payload["posterior"] == snap["posterior"]
    path = tmp_path / "session.log"
    write_log(path, session.log_header(), session.records)
    header, records = read_log(path)
    assert [r.action for r in records] == [r.action for r in session.records]


def test_config_serialization_roundtrip():
    config = SessionConfig.blockwords(tau=0.3, head_start=1, beta=2.0, fallback="default-goal",
                                      seed=5, true_goal="later")
    rebuilt = SessionConfig.from_jsonable(json.loads(json.dumps(config.to_jsonable())))
    assert rebuilt == config


def run_scripted(config, script):
    session = Session(config)
    for uid in script:
        session.submit_user_action(uid)
        if session.terminal:
            break
        session.agent_step()
        if session.terminal:
            break
    return session


SCRIPT = ["unstack(user,h,e)", "putdown(user,h)", "pickup(user,t)", "stack(user,t,e)",
          "pickup(user,a)", "stack(user,a,t)", "pickup(user,l)", "stack(user,l,a)"]


def test_replay_reproduces_session(tmp_path):
    config = observer_config(head_start=1)
    session = run_scripted(config, SCRIPT)
    path = tmp_path / "game.log"
    write_log(path, session.log_header(), session.records)
    report = replay_log(path)
    assert report.ok and report.turns == len(session.records)


def test_rerun_is_deterministic():
    config = observer_config(head_start=1)
    first = run_scripted(config, SCRIPT)
    second = run_scripted(config, SCRIPT)
    strip_ts = lambda r: {k: v for k, v in json.loads(r.to_json()).items() if k != "ts"}
    assert [strip_ts(r) for r in first.records] == [strip_ts(r) for r in second.records]


def test_replay_of_active_agent_session(tmp_path):
    """The user passes every turn; the agent builds the whole word itself,
    which exercises prediction, plan reuse, and replay of agent decisions."""
    config = single_goal_config(tau=0.5, head_start=0)
    session = Session(config)
    while not session.terminal and session.turn_counter < 20:
        session.submit_user_action("noop(user)")
        if session.terminal:
            break
        session.agent_step()
    assert session.is_terminal()[0]
    assert "father" in session.satisfied_goals()
    path = tmp_path / "agentgame.log"
    write_log(path, session.log_header(), session.records)
    assert replay_log(path).turns == len(session.records)


def test_replay_detects_tampered_digest(tmp_path):
    config = observer_config(head_start=1)
    session = run_scripted(config, SCRIPT[:4])
    records = list(session.records)
    records[2] = dataclasses.replace(records[2], digest="0" * 64)
    path = tmp_path / "tampered.log"
    write_log(path, session.log_header(), records)
    with pytest.raises(DigestMismatchError) as err:
        replay_log(path)
    assert err.value.line == 4  # header + two good records


def test_truncate_observations_rebases_recognition():
    session = Session(observer_config())
    for uid in SCRIPT[:4]:
        session.submit_user_action(uid)
        if not session.terminal:
            session.agent_step()
    full = len(session.observations)
    assert full >= 8
    session.truncate_observations(keep_last=2)
    assert len(session.observations) == 2
    assert len(session.recognition_observations()) <= 2
    session.submit_user_action(SCRIPT[4])
    action, _ = session.agent_step()
    assert action is not None
