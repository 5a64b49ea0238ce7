import json
import threading

import pytest
from fastapi.testclient import TestClient

from coplan.service import SessionRegistry, create_app


@pytest.fixture()
def client():
    app = create_app(SessionRegistry(), heartbeat=0.05)
    with TestClient(app) as c:
        yield c


def new_session(client, **overrides):
    payload = {"tau": 0.5, "headStart": 0, "budgetNodes": 6000}
    payload.update(overrides)
    resp = client.post("/sessions", json=payload)
    assert resp.status_code == 201, resp.text
    body = resp.json()
    return body["sessionId"], body["view"]


def test_create_demo_session(client):
    sid, view = new_session(client, headStart=2)
    assert len(view["stacks"]) == 10
    assert view["words"] == ["father", "mother", "master", "faster", "later", "water"]
    assert view["turn"] == "user"
    assert view["turnCounter"] == 0
    assert view["config"]["headStart"] == 2
    assert view["config"]["beta"] == 1.0  # omitted optional defaults in the echo
    uids = {a["uid"] for a in view["legalActions"]}
    assert "pickup(user,t)" in uids and "unstack(user,h,e)" in uids
    assert "pickup(user,e)" not in uids


def test_create_rejects_bad_tau(client):
    resp = client.post("/sessions", json={"tau": -0.1})
    assert resp.status_code == 400
    assert "tau" in resp.json()["detail"]


def test_view_serialization_roundtrip(client):
    sid, view = new_session(client)
    assert json.loads(json.dumps(view)) == view
    fetched = client.get(f"/sessions/{sid}").json()
    assert fetched == view


def test_unknown_session_is_404(client):
    assert client.get("/sessions/ghost").status_code == 404
    assert client.get("/sessions/ghost/debug").status_code == 404
    resp = client.post("/sessions/ghost/actions", json={"name": "noop", "args": ["user"]})
    assert resp.status_code == 404


def test_post_action_returns_both_moves(client):
    sid, _ = new_session(client)
    resp = client.post(
        f"/sessions/{sid}/actions",
        json={"name": "pickup", "args": ["user", "t"], "debug": True},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["userAction"] == "pickup(user,t)"
    assert body["agentAction"] is not None
    assert body["verdict"]["kind"] == "no-prediction"
    assert body["view"]["turnCounter"] == 2  # atomic turn: both moves committed
    assert body["view"]["turn"] == "user"
    assert "posterior" in body["debug"]


def test_illegal_action_is_409(client):
    sid, _ = new_session(client)
    resp = client.post(f"/sessions/{sid}/actions", json={"name": "pickup", "args": ["user", "e"]})
    assert resp.status_code == 409
    assert "clear(e)" in resp.json()["detail"]
    resp = client.post(f"/sessions/{sid}/actions", json={"name": "warp", "args": ["user", "e"]})
    assert resp.status_code == 409


def test_finished_session_rejects_actions(client):
    sid, _ = new_session(client)
    quit_view = client.post(f"/sessions/{sid}/quit").json()
    assert quit_view["terminal"]
    resp = client.post(f"/sessions/{sid}/actions", json={"name": "noop", "args": ["user"]})
    assert resp.status_code == 409


def test_list_sessions(client):
    sid1, _ = new_session(client)
    sid2, _ = new_session(client)
    listed = client.get("/sessions").json()["sessions"]
    assert {s["sessionId"] for s in listed} >= {sid1, sid2}


def test_debug_endpoint(client):
    sid, _ = new_session(client)
    client.post(f"/sessions/{sid}/actions", json={"name": "unstack", "args": ["user", "h", "e"]})
    snap = client.get(f"/sessions/{sid}/debug").json()
    assert set(snap["posterior"]["probs"]) == {"father", "mother", "master", "faster", "later", "water"}
    assert snap["turn"] == 2


def test_event_stream_order_and_resume(client):
    sid, _ = new_session(client)
    for move in (["pickup", "t"], ["putdown", "t"], ["pickup", "t"]):
        resp = client.post(
            f"/sessions/{sid}/actions", json={"name": move[0], "args": ["user", move[1]]}
        )
        assert resp.status_code == 200
    client.post(f"/sessions/{sid}/quit")

    def read_events(since):
        events = []
        with client.stream("GET", f"/sessions/{sid}/events?since={since}") as resp:
            assert resp.headers["content-type"].startswith("text/event-stream")
            current = {}
            for line in resp.iter_lines():
                if line.startswith("id:"):
                    current["id"] = int(line.split(":", 1)[1])
                elif line.startswith("event:"):
                    current["event"] = line.split(":", 1)[1].strip()
                elif line.startswith("data:"):
                    current["data"] = json.loads(line.split(":", 1)[1])
                elif not line and current:
                    events.append(current)
                    current = {}
                    if events[-1].get("event") == "end":
                        break
        return events

    events = read_events(0)
    turns = [e for e in events if e["event"] == "turn"]
    assert [e["id"] for e in turns] == [1, 2, 3, 4, 5, 6]
    assert turns[0]["data"]["record"]["action"] == "pickup(user,t)"
    assert events[-1]["event"] == "end"

    resumed = [e for e in read_events(2) if e["event"] == "turn"]
    assert [e["id"] for e in resumed] == [3, 4, 5, 6]


def test_event_stream_unknown_session(client):
    with client.stream("GET", "/sessions/nope/events") as resp:
        lines = [line for line in resp.iter_lines() if line]
    assert any(line.startswith("event: error") for line in lines)


def test_event_stream_heartbeat_on_idle(client):
    sid, _ = new_session(client)
    heartbeats = 0
    with client.stream("GET", f"/sessions/{sid}/events") as resp:
        for line in resp.iter_lines():
            if line.startswith(": heartbeat"):
                heartbeats += 1
                if heartbeats >= 2:
                    break
    assert heartbeats >= 2


def test_commands_are_serialized_per_session(client):
    sid, _ = new_session(client, headStart=6)
    moves = [["pickup", "t"], ["putdown", "t"], ["pickup", "b"], ["putdown", "b"]]
    errors = []

    def play(move):
        resp = client.post(f"/sessions/{sid}/actions", json={"name": move[0], "args": ["user", move[1]]})
        if resp.status_code != 200:
            errors.append(resp.json())

    threads = [threading.Thread(target=play, args=(m,)) for m in moves]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    view = client.get(f"/sessions/{sid}").json()
    # every accepted action committed a full user+agent exchange
    assert view["turnCounter"] == 2 * (len(moves) - len(errors))
    assert all("not applicable" in e["detail"] or "turn" in e["detail"] for e in errors)


def test_crash_recovery_restores_sessions(tmp_path):
    data_dir = tmp_path / "sessions"
    registry = SessionRegistry(str(data_dir))
    app = create_app(registry, heartbeat=0.05)
    with TestClient(app) as client:
        sid, _ = new_session(client, headStart=1)
        client.post(f"/sessions/{sid}/actions", json={"name": "unstack", "args": ["user", "h", "e"]})
        client.post(f"/sessions/{sid}/actions", json={"name": "putdown", "args": ["user", "h"]})
        before = client.get(f"/sessions/{sid}").json()
        registry.close()

    revived = SessionRegistry(str(data_dir))
    assert revived.restore() == [sid]
    after = revived.view(sid)
    assert after == before
    assert len(revived.events_since(sid, 0)) == 4
