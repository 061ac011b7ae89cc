"""HTTP service contracts: storage, runs, cancellation, sessions, what-ifs."""

import json
import time

import pytest
from fastapi.testclient import TestClient

from blendforge import Strategy, optimize, save_scenario
from blendforge.server import create_app
from toys import directive_toy, two_rom_toy

STRATEGY_DOC = {
    "name": "anneal",
    "parameters": {"seed": 31, "budget_evaluations": 3000, "restarts": 2},
}


@pytest.fixture
def client(tmp_path):
    app = create_app(workers=2, runlog_path=str(tmp_path / "server.runlog"))
    with TestClient(app) as c:
        yield c


def put_toy(client, scenario_id="toy", scenario=None):
    data = save_scenario(scenario or two_rom_toy())
    response = client.put(f"/scenarios/{scenario_id}", content=data)
    assert response.status_code == 201
    return data


def wait_run(client, run_id, states=("done",), timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        doc = client.get(f"/runs/{run_id}").json()
        if doc["state"] in states:
            return doc
        time.sleep(0.02)
    raise AssertionError(f"run {run_id} never reached {states}")


class TestScenarioEndpoints:
    def test_put_then_get_byte_identical(self, client):
        data = put_toy(client)
        got = client.get("/scenarios/toy")
        assert got.status_code == 200
        assert got.content == data

    def test_put_invalid_returns_422_with_paths(self, client):
        doc = json.loads(save_scenario(two_rom_toy()))
        doc["scenario"]["roms"][0]["available_tonnes"] = [-1.0]
        response = client.put("/scenarios/bad", content=json.dumps(doc))
        assert response.status_code == 422
        issues = response.json()["issues"]
        assert any(i["code"] == "rom.available.negative" for i in issues)

    def test_get_unknown_404(self, client):
        assert client.get("/scenarios/nope").status_code == 404


class TestOptimizeEndpoints:
    def test_run_matches_in_process_result(self, client):
        put_toy(client)
        response = client.post("/scenarios/toy/optimize", json={"strategy": STRATEGY_DOC})
        assert response.status_code == 202
        run_id = response.json()["run_id"]
        doc = wait_run(client, run_id)
        local = optimize(two_rom_toy(), Strategy(**STRATEGY_DOC))
        assert doc["result"]["objective"] == local.objective_value
        assert doc["result"]["plan"] == json.loads(
            __import__("blendforge").save_plan(local.plan)
        )

    def test_unknown_run_404(self, client):
        assert client.get("/runs/nope").status_code == 404

    def test_unknown_scenario_404(self, client):
        response = client.post("/scenarios/nope/optimize", json={"strategy": STRATEGY_DOC})
        assert response.status_code == 404

    def test_invalid_strategy_422(self, client):
        put_toy(client)
        response = client.post(
            "/scenarios/toy/optimize", json={"strategy": {"name": "anneal"}}
        )
        assert response.status_code == 422

    def test_cancel_finished_run_409(self, client):
        put_toy(client)
        run_id = client.post(
            "/scenarios/toy/optimize", json={"strategy": STRATEGY_DOC}
        ).json()["run_id"]
        wait_run(client, run_id)
        assert client.delete(f"/runs/{run_id}").status_code == 409

    def test_cancel_midway_keeps_partial_result(self, client):
        put_toy(client)
        slow = {
            "name": "anneal",
            "parameters": {
                "seed": 1,
                "budget_evaluations": 5_000_000,
                "stall_evaluations": 5_000_000,
            },
        }
        run_id = client.post("/scenarios/toy/optimize", json={"strategy": slow}).json()[
            "run_id"
        ]
        deadline = time.time() + 10
        while time.time() < deadline:
            state = client.get(f"/runs/{run_id}").json()["state"]
            if state == "running":
                break
            time.sleep(0.01)
        response = client.delete(f"/runs/{run_id}")
        assert response.status_code == 202
        doc = wait_run(client, run_id, states=("cancelled",))
        assert doc["state"] == "cancelled"
        assert "result" in doc  # best-so-far plan came back


class TestSessionEndpoints:
    def open_session(self, client, scenario=None):
        put_toy(client, scenario=scenario)
        response = client.post(
            "/sessions", json={"scenario_id": "toy", "strategy": STRATEGY_DOC}
        )
        assert response.status_code == 201
        return response.json()

    def test_what_if_leaves_session_byte_identical(self, client):
        session = self.open_session(client, directive_toy())
        sid = session["session_id"]
        before = client.get(f"/sessions/{sid}").content
        response = client.post(
            f"/sessions/{sid}/what-if",
            json={
                "directives": [
                    {"kind": "quality_delta", "product_id": "blend-a", "attribute": "ash", "delta": -2.0}
                ]
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["success"] is True
        assert body["objective_delta"] is not None
        after = client.get(f"/sessions/{sid}").content
        assert before == after

    def test_directives_mutate_and_append_history(self, client):
        session = self.open_session(client, directive_toy())
        sid = session["session_id"]
        response = client.post(
            f"/sessions/{sid}/directives",
            json={
                "directives": [
                    {"kind": "quality_delta", "product_id": "blend-a", "attribute": "ash", "delta": -2.0}
                ]
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["success"] is True
        refreshed = client.get(f"/sessions/{sid}").json()
        assert len(refreshed["history"]) == 2
        assert refreshed["incumbent"]["plan"] == body["result"]["plan"]

    def test_conflicting_directives_name_both(self, client):
        session = self.open_session(client, directive_toy())
        sid = session["session_id"]
        response = client.post(
            f"/sessions/{sid}/directives",
            json={
                "directives": [
                    {"kind": "pin_allotment", "period": 0, "product_id": "blend-a", "rom_id": "sweet", "lots": 3},
                    {"kind": "exclude_rom", "rom_id": "sweet", "product_id": "blend-a"},
                ]
            },
        )
        assert response.status_code == 422
        conflict = response.json()["conflict"]
        kinds = {c["kind"] for c in conflict}
        assert kinds == {"pin_allotment", "exclude_rom"}

    def test_infeasible_directive_reports_binding_constraint(self, client):
        session = self.open_session(client, directive_toy())
        sid = session["session_id"]
        response = client.post(
            f"/sessions/{sid}/directives",
            json={
                "directives": [
                    {"kind": "quality_delta", "product_id": "blend-a", "attribute": "ash", "delta": -9.0}
                ]
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["success"] is False
        assert body["binding_constraint"] == "quality-bound:blend-a:ash:0"
        refreshed = client.get(f"/sessions/{sid}").json()
        assert len(refreshed["history"]) == 1

    def test_analytics_endpoint(self, client):
        session = self.open_session(client, directive_toy())
        sid = session["session_id"]
        response = client.get(f"/sessions/{sid}/analytics")
        assert response.status_code == 200
        body = response.json()
        assert body["contributions"]
        assert set(body["marginals"]) == {"dirty", "sweet"}

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404
        assert client.post("/sessions/nope/what-if", json={"directives": []}).status_code == 404

    def test_session_for_unknown_scenario_404(self, client):
        response = client.post(
            "/sessions", json={"scenario_id": "missing", "strategy": STRATEGY_DOC}
        )
        assert response.status_code == 404

    def test_busy_session_gets_409(self, client):
        session = self.open_session(client, directive_toy())
        sid = session["session_id"]
        state = client.app.state.blendforge
        lock = state.session_locks[sid]
        assert lock.acquire(blocking=False)  # another directive run holds it
        try:
            response = client.post(f"/sessions/{sid}/directives", json={"directives": []})
            assert response.status_code == 409
        finally:
            lock.release()
        # History untouched by the refused call.
        assert len(client.get(f"/sessions/{sid}").json()["history"]) == 1


class TestPortResolution:
    def test_port_env_var_and_default(self, monkeypatch):
        from blendforge.server import resolve_port

        monkeypatch.delenv("BLENDFORGE_PORT", raising=False)
        assert resolve_port() == 8080
        monkeypatch.setenv("BLENDFORGE_PORT", "9911")
        assert resolve_port() == 9911
        assert resolve_port(7001) == 7001


class TestDeterminismAcrossRestart:
    def test_same_strategy_same_bytes(self, tmp_path):
        results = []
        for round_index in range(2):
            app = create_app(workers=1, runlog_path=str(tmp_path / f"r{round_index}.runlog"))
            with TestClient(app) as client:
                put_toy(client)
                run_id = client.post(
                    "/scenarios/toy/optimize", json={"strategy": STRATEGY_DOC}
                ).json()["run_id"]
                doc = wait_run(client, run_id)
                results.append(json.dumps(doc["result"], sort_keys=True))
        assert results[0] == results[1]

    def test_runlog_has_entries(self, tmp_path):
        from blendforge import RunLog

        path = tmp_path / "log.runlog"
        app = create_app(workers=1, runlog_path=str(path))
        with TestClient(app) as client:
            put_toy(client)
            run_id = client.post(
                "/scenarios/toy/optimize", json={"strategy": STRATEGY_DOC}
            ).json()["run_id"]
            wait_run(client, run_id)
        entries = RunLog(path).entries()
        assert len(entries) == 1
        assert entries[0]["strategy"]["name"] == "anneal"
