import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from idvoi.cli import run_cli
from idvoi.jsonio import canonical_json
from idvoi.model import (
    Cpt,
    Evidence,
    InfluenceDiagram,
    UtilityNode,
    Variable,
    parse_model,
    serialize_model,
)
from idvoi.service import create_app
from idvoi.solve import solve_meu
from idvoi.voi import voi_report

MODELS = Path(__file__).resolve().parents[1] / "models"
WEATHER_TEXT = (MODELS / "weather_vendor.model").read_text()
STAGED_TEXT = (MODELS / "staged_chain.model").read_text()


@pytest.fixture
def client():
    return TestClient(create_app())


def upload(client, text) -> str:
    r = client.post("/models", content=text)
    assert r.status_code == 201
    return r.json()["id"]


def open_session(client, text) -> tuple[str, dict]:
    mid = upload(client, text)
    r = client.post("/sessions", json={"model_id": mid})
    assert r.status_code == 201
    view = r.json()
    return view["id"], view


def observe(client, sid, var, state):
    return client.post(
        f"/sessions/{sid}/steps", json={"observe": {"variable": var, "state": state}}
    )


def decide(client, sid, decision, action):
    return client.post(
        f"/sessions/{sid}/steps", json={"decide": {"decision": decision, "action": action}}
    )


class TestModels:
    def test_upload_and_fetch_round_trip(self, client):
        mid = upload(client, WEATHER_TEXT)
        r = client.get(f"/models/{mid}")
        assert r.status_code == 200
        assert r.text == serialize_model(parse_model(WEATHER_TEXT))

    def test_duplicate_upload_gets_new_id(self, client):
        assert upload(client, WEATHER_TEXT) != upload(client, WEATHER_TEXT)

    def test_invalid_model_returns_violations(self, client):
        doc = json.loads(WEATHER_TEXT)
        doc["cpts"][0]["values"] = [0.6]
        r = client.post("/models", content=json.dumps(doc))
        assert r.status_code == 400
        body = r.json()
        assert body["error"] == "invalid model"
        assert body["violations"]

    def test_unparseable_model(self, client):
        r = client.post("/models", content="{ nope")
        assert r.status_code == 400
        assert r.json()["violations"][0]["rule"] == "format"

    def test_unknown_model(self, client):
        assert client.get("/models/zzz").status_code == 404
        r = client.post("/sessions", json={"model_id": "zzz"})
        assert r.status_code == 404


class TestSessionFlow:
    def test_initial_view(self, client):
        sid, view = open_session(client, STAGED_TEXT)
        assert view["stage"] == 1
        assert view["n_decisions"] == 3
        assert view["pending_decision"] == {"name": "D_1", "actions": ["d1_0", "d1_1"]}
        assert view["candidates"] == [
            {"name": "B", "lower_bound": 0, "modeled": 3, "states": ["b0", "b1"]}
        ]
        assert view["evidence"] == []
        assert abs(view["meu"] - 72.59975) <= 1e-9
        # timeline interleaves information sets and decisions: I_0, D_1, ..., I_3
        kinds = [(t["kind"], t.get("name") or t["members"]) for t in view["timeline"]]
        assert kinds == [
            ("I", []),
            ("D", "D_1"),
            ("I", ["C"]),
            ("D", "D_2"),
            ("I", ["A", "E"]),
            ("D", "D_3"),
            ("I", ["B"]),
        ]

    def test_full_walkthrough(self, client):
        sid, _ = open_session(client, STAGED_TEXT)
        assert decide(client, sid, "D_1", "d1_0").status_code == 200
        view = client.get(f"/sessions/{sid}").json()
        assert view["stage"] == 2
        names = [c["name"] for c in view["candidates"]]
        assert names == ["B", "C"]
        assert observe(client, sid, "C", "c0").status_code == 200
        assert decide(client, sid, "D_2", "d2_1").status_code == 200
        assert observe(client, sid, "A", "a0").status_code == 200
        assert observe(client, sid, "E", "e0").status_code == 200
        view = decide(client, sid, "D_3", "d3_0").json()
        assert view["stage"] == 4
        assert view["pending_decision"] is None
        assert len(view["evidence"]) == 6
        # terminal meu is the expected utility of the committed walk
        assert 0.0 < view["evidence_probability"] < 1.0

    def test_wrong_stage_decision_409(self, client):
        sid, _ = open_session(client, STAGED_TEXT)
        r = decide(client, sid, "D_2", "d2_0")
        assert r.status_code == 409
        assert "not pending" in r.json()["error"]

    def test_illegal_observation_below_bound_409(self, client):
        sid, _ = open_session(client, STAGED_TEXT)
        r = observe(client, sid, "A", "a0")
        assert r.status_code == 409
        assert "influences" in r.json()["error"]

    def test_observation_after_modeled_placement_409(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        assert decide(client, sid, "d", "outdoor").status_code == 200
        r = observe(client, sid, "S", "dry")
        assert r.status_code == 409
        assert "after the modeled placement" in r.json()["error"]

    def test_double_observation_409(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        assert observe(client, sid, "S", "dry").status_code == 200
        r = observe(client, sid, "S", "dry")
        assert r.status_code == 409
        assert "already observed" in r.json()["error"]

    def test_bad_state_409(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        r = observe(client, sid, "S", "humid")
        assert r.status_code == 409
        assert "legal states" in r.json()["error"]

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/zzz").status_code == 404
        assert observe(client, "zzz", "S", "dry").status_code == 404

    def test_malformed_step_400(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        r = client.post(f"/sessions/{sid}/steps", json={"observe": {}, "decide": {}})
        assert r.status_code == 400

    def test_zero_probability_observation_409(self, client):
        diagram = InfluenceDiagram(
            [
                Variable("X", "chance", ("x0", "x1")),
                Variable("Y", "chance", ("y0", "y1")),
                Variable("d", "decision", ("a", "b")),
            ],
            [Cpt("X", (), [0.5, 0.5]), Cpt("Y", ("X",), [1.0, 0.0, 0.0, 1.0])],
            [UtilityNode("U", ("d",), [1.0, 2.0])],
            decision_order=["d"],
            information_sets=[["X", "Y"], []],
        )
        sid, _ = open_session(client, serialize_model(diagram))
        assert observe(client, sid, "X", "x0").status_code == 200
        r = observe(client, sid, "Y", "y1")
        assert r.status_code == 409
        assert "zero probability" in r.json()["error"]

    def test_concurrent_sessions_do_not_interfere(self, client):
        mid = upload(client, WEATHER_TEXT)
        s1 = client.post("/sessions", json={"model_id": mid}).json()["id"]
        s2 = client.post("/sessions", json={"model_id": mid}).json()["id"]
        assert observe(client, s1, "S", "dry").status_code == 200
        assert observe(client, s2, "S", "wet").status_code == 200
        v1 = client.get(f"/sessions/{s1}").json()
        v2 = client.get(f"/sessions/{s2}").json()
        assert v1["evidence"] == [{"kind": "observe", "variable": "S", "state": "dry"}]
        assert v2["evidence"] == [{"kind": "observe", "variable": "S", "state": "wet"}]
        assert v1["meu"] != v2["meu"]

    def test_no_decision_model_is_read_only(self, client):
        diagram = InfluenceDiagram(
            [Variable("X", "chance", ("x0", "x1"))],
            [Cpt("X", (), [0.25, 0.75])],
            [UtilityNode("U", ("X",), [4.0, 8.0])],
            decision_order=[],
            information_sets=[["X"]],
        )
        sid, view = open_session(client, serialize_model(diagram))
        assert view["pending_decision"] is None
        assert abs(view["meu"] - 7.0) <= 1e-9
        assert observe(client, sid, "X", "x1").status_code == 200
        assert abs(client.get(f"/sessions/{sid}").json()["meu"] - 8.0) <= 1e-9
        assert client.get(f"/sessions/{sid}/voi?decision=d").status_code == 409
        assert client.get(f"/sessions/{sid}/recommendation").status_code == 409


class TestVoi:
    def test_default_candidates_and_cache_bytes(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        assert observe(client, sid, "S", "dry").status_code == 200
        r1 = client.get(f"/sessions/{sid}/voi?decision=d")
        r2 = client.get(f"/sessions/{sid}/voi?decision=d")
        assert r1.status_code == 200
        assert r1.content == r2.content
        doc = r1.json()
        assert [c["name"] for c in doc["candidates"]] == ["H", "A"]
        assert abs(doc["candidates"][0]["voi"] - 12.0) <= 1e-9

    def test_bytes_equal_library_report(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        observe(client, sid, "S", "dry")
        r = client.get(f"/sessions/{sid}/voi?decision=d&candidates=H,A")
        report = voi_report(
            parse_model(WEATHER_TEXT), "d", ("H", "A"), Evidence({"S": "dry"})
        )
        assert r.text == canonical_json(report.to_jsonable())

    def test_bytes_equal_cli_json(self, client, capsys):
        sid, _ = open_session(client, STAGED_TEXT)
        r = client.get(f"/sessions/{sid}/voi?decision=D_1")
        code = run_cli(
            ["value", str(MODELS / "staged_chain.model"), "--decision", "D_1",
             "--candidates", "B", "--json"]
        )
        assert code == 0
        assert r.text == capsys.readouterr().out

    def test_voi_not_pending_409(self, client):
        sid, _ = open_session(client, STAGED_TEXT)
        r = client.get(f"/sessions/{sid}/voi?decision=D_2")
        assert r.status_code == 409
        assert "not pending" in r.json()["error"]

    def test_explicit_illegal_candidate_is_flagged(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        observe(client, sid, "S", "dry")
        r = client.get(f"/sessions/{sid}/voi?decision=d&candidates=S,H")
        assert r.status_code == 200
        rows = {c["name"]: c for c in r.json()["candidates"]}
        assert rows["S"]["legal"] is False
        assert "already observed" in rows["S"]["reason"]
        assert rows["H"]["legal"] is True

    def test_mid_session_expand_route(self, client):
        sid, _ = open_session(client, STAGED_TEXT)
        decide(client, sid, "D_1", "d1_0")
        r = client.get(f"/sessions/{sid}/voi?decision=D_2")
        rows = {c["name"]: c for c in r.json()["candidates"]}
        assert rows["B"]["legal"] is True
        assert rows["B"]["method"] == "expand"
        assert rows["C"]["legal"] is False
        assert "already observed at or before I_1" in rows["C"]["reason"]

    def test_moved_observation_then_voi(self, client):
        sid, _ = open_session(client, STAGED_TEXT)
        assert observe(client, sid, "B", "b0").status_code == 200
        r = client.get(f"/sessions/{sid}/voi?decision=D_1")
        assert r.status_code == 200
        doc = r.json()
        # B pinned before D_1: deciding D_3 on b0 alone is worth 100
        assert doc["candidates"] == []
        assert abs(doc["baseline"] - 100.0) <= 1e-9


class TestRecommendation:
    def test_expected_utilities_per_action(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        observe(client, sid, "S", "dry")
        r = client.get(f"/sessions/{sid}/recommendation")
        assert r.status_code == 200
        doc = r.json()
        assert doc["decision"] == "d"
        assert doc["best"] == "outdoor"
        assert doc["best_index"] == 0
        eus = {u["action"]: u["eu"] for u in doc["utilities"]}
        assert abs(eus["outdoor"] - 80.0) <= 1e-9
        assert abs(eus["indoor"] - 44.0) <= 1e-9

    def test_matches_policy_entry(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        observe(client, sid, "S", "wet")
        doc = client.get(f"/sessions/{sid}/recommendation").json()
        solution = solve_meu(parse_model(WEATHER_TEXT))
        expected = solution.decide("d", {"S": 1})
        assert doc["best_index"] == expected

    def test_recomputes_after_observation(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        observe(client, sid, "S", "dry")
        before = client.get(f"/sessions/{sid}/recommendation").json()
        assert observe(client, sid, "H", "rain").status_code == 200
        after = client.get(f"/sessions/{sid}/recommendation").json()
        assert before["best"] == "outdoor"
        assert after["best"] == "indoor"

    def test_terminal_409(self, client):
        sid, _ = open_session(client, WEATHER_TEXT)
        decide(client, sid, "d", "indoor")
        assert client.get(f"/sessions/{sid}/recommendation").status_code == 409


class TestPersistence:
    def test_replay_reproduces_reports_byte_for_byte(self, tmp_path):
        c1 = TestClient(create_app(state_dir=tmp_path))
        sid, _ = open_session(c1, STAGED_TEXT)
        decide(c1, sid, "D_1", "d1_0")
        observe(c1, sid, "C", "c1")
        voi_before = c1.get(f"/sessions/{sid}/voi?decision=D_2")
        view_before = c1.get(f"/sessions/{sid}")

        c2 = TestClient(create_app(state_dir=tmp_path))
        voi_after = c2.get(f"/sessions/{sid}/voi?decision=D_2")
        view_after = c2.get(f"/sessions/{sid}")
        assert voi_after.content == voi_before.content
        assert view_after.content == view_before.content

    def test_models_survive_restart(self, tmp_path):
        c1 = TestClient(create_app(state_dir=tmp_path))
        mid = upload(c1, WEATHER_TEXT)
        c2 = TestClient(create_app(state_dir=tmp_path))
        assert c2.get(f"/models/{mid}").text == serialize_model(
            parse_model(WEATHER_TEXT)
        )


class TestConsoleMount:
    def test_console_served_when_directory_exists(self, tmp_path):
        console = tmp_path / "console"
        console.mkdir()
        (console / "index.html").write_text("<div id=\"app\"></div>")
        client = TestClient(
            create_app(state_dir=tmp_path / "state", console_dir=console)
        )
        r = client.get("/")
        assert r.status_code == 200
        assert 'id="app"' in r.text
        # API routes keep precedence over the static mount
        r = client.post("/models", content="not a model")
        assert r.status_code == 400
