"""HTTP service for scenarios, optimization runs, guided sessions, what-ifs,
and analytics.

Long-running optimization is modeled as polled runs on a bounded worker
pool; cancellation is cooperative at evaluation boundaries and keeps the
best plan found so far. One process, in-memory stores, finished runs
appended to the run log. Request and response bodies use the same canonical
JSON documents as the file formats.
"""

from __future__ import annotations

import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .analytics import analytics_to_doc, build_report
from .errors import (
    BlendforgeError,
    DirectiveConflictError,
    DirectiveError,
    DocumentError,
)
from .guided import (
    GuidedOutcome,
    Session,
    directive_from_doc,
    directive_to_doc,
    guided_preview,
    guided_reoptimize,
    open_session,
)
from .optimizer import OptimizeResult, Strategy, optimize
from .scenario_io import (
    RunLog,
    canonical_bytes,
    load_scenario,
    plan_to_doc,
    report_to_doc,
    scenario_hash,
    save_scenario,
)
from .types import Scenario

DEFAULT_PORT = 8080
PORT_ENV_VAR = "BLENDFORGE_PORT"


@dataclass
class RunRecord:
    run_id: str
    scenario_id: str
    strategy: Strategy
    state: str = "queued"  # queued | running | done | cancelled | failed
    evaluations: int = 0
    budget: int = 0
    result: OptimizeResult | None = None
    error: str | None = None
    cancel: threading.Event = field(default_factory=threading.Event)


def result_to_doc(result: OptimizeResult) -> dict:
    return {
        "plan": plan_to_doc(result.plan),
        "report": report_to_doc(result.report),
        "objective": result.objective_value,
        "objective_kind": result.objective_kind,
        "feasible": result.feasible,
        "trace": [[index, value] for index, value in result.trace],
        "evaluations": result.evaluations,
    }


def run_to_doc(record: RunRecord) -> dict:
    doc = {
        "run_id": record.run_id,
        "scenario_id": record.scenario_id,
        "state": record.state,
        "progress": {"evaluations": record.evaluations, "budget": record.budget},
    }
    if record.result is not None:
        doc["result"] = result_to_doc(record.result)
    if record.error is not None:
        doc["error"] = record.error
    return doc


def session_to_doc(session: Session) -> dict:
    return {
        "session_id": session.id,
        "strategy": session.strategy.to_doc(),
        "incumbent": {
            "plan": plan_to_doc(session.incumbent_plan),
            "report": report_to_doc(session.incumbent_report),
            "objective": session.incumbent_result.objective_value,
            "feasible": session.incumbent_result.feasible,
        },
        "directives": [directive_to_doc(d) for d in session.stacked_directives()],
        "history": [
            {
                "directives": [directive_to_doc(d) for d in entry.directives],
                "objective": entry.result.objective_value,
            }
            for entry in session.history
        ],
    }


def _whatif_deltas(session: Session, outcome: GuidedOutcome) -> dict:
    if not outcome.success or outcome.result is None:
        return {"per_product_period": [], "changed_cells": []}
    before = session.incumbent_report
    after = outcome.result.report
    rows = []
    keys = {(r.product_id, r.period) for r in before.per_product_period}
    keys |= {(r.product_id, r.period) for r in after.per_product_period}
    for product_id, period in sorted(keys):
        b = before.row(product_id, period)
        a = after.row(product_id, period)
        b_quality = b.blended_quality if b else {}
        a_quality = a.blended_quality if a else {}
        rows.append(
            {
                "product_id": product_id,
                "period": period,
                "tonnes_delta": (a.tonnes if a else 0.0) - (b.tonnes if b else 0.0),
                "quality_delta": {
                    code: a_quality.get(code, 0.0) - b_quality.get(code, 0.0)
                    for code in sorted(set(a_quality) | set(b_quality))
                },
            }
        )
    old_cells = session.incumbent_plan.cells()
    new_cells = outcome.result.plan.cells()
    changed = []
    for cell in sorted(set(old_cells) | set(new_cells)):
        if old_cells.get(cell, 0) != new_cells.get(cell, 0):
            period, product_id, rom_id = cell
            changed.append(
                {
                    "period": period,
                    "product_id": product_id,
                    "rom_id": rom_id,
                    "lots_before": old_cells.get(cell, 0),
                    "lots_after": new_cells.get(cell, 0),
                }
            )
    return {"per_product_period": rows, "changed_cells": changed}


def outcome_to_doc(session: Session, outcome: GuidedOutcome) -> dict:
    doc = {
        "success": outcome.success,
        "binding_constraint": outcome.binding_constraint,
        "objective_delta": outcome.objective_delta,
        "deltas": _whatif_deltas(session, outcome),
    }
    if outcome.result is not None:
        doc["result"] = result_to_doc(outcome.result)
    return doc


def _canonical_response(doc: dict, status_code: int = 200) -> Response:
    return Response(
        content=canonical_bytes(doc), media_type="application/json", status_code=status_code
    )


def _error_response(status_code: int, message: str, **extra) -> JSONResponse:
    return JSONResponse({"error": message, **extra}, status_code=status_code)


class AppState:
    def __init__(self, workers: int, runlog_path: str | None):
        self.scenarios: dict[str, tuple[Scenario, bytes]] = {}
        self.runs: dict[str, RunRecord] = {}
        self.sessions: dict[str, Session] = {}
        self.session_locks: dict[str, threading.Lock] = {}
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self.runlog = RunLog(runlog_path) if runlog_path else None
        self.lock = threading.Lock()

    def log_run(self, scenario_bytes: bytes, strategy: Strategy, directives, objective: float):
        if self.runlog is None:
            return
        self.runlog.append(
            scenario_hash(scenario_bytes),
            strategy.to_doc(),
            [directive_to_doc(d) for d in directives],
            objective,
        )


def create_app(workers: int = 4, runlog_path: str | None = None, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="blendforge", docs_url=None, redoc_url=None)
    state = AppState(workers, runlog_path)
    app.state.blendforge = state

    @app.put("/scenarios/{scenario_id}")
    async def put_scenario(scenario_id: str, request: Request):
        body = await request.body()
        try:
            scenario = load_scenario(body)
        except DocumentError as exc:
            return JSONResponse(
                {"error": "invalid scenario", "issues": [i.as_dict() for i in exc.issues]},
                status_code=422,
            )
        with state.lock:
            state.scenarios[scenario_id] = (scenario, save_scenario(scenario))
        return _canonical_response({"scenario_id": scenario_id, "stored": True}, 201)

    @app.get("/scenarios/{scenario_id}")
    async def get_scenario(scenario_id: str):
        entry = state.scenarios.get(scenario_id)
        if entry is None:
            return _error_response(404, f"unknown scenario {scenario_id!r}")
        return Response(content=entry[1], media_type="application/json")

    @app.post("/scenarios/{scenario_id}/optimize")
    async def post_optimize(scenario_id: str, request: Request):
        entry = state.scenarios.get(scenario_id)
        if entry is None:
            return _error_response(404, f"unknown scenario {scenario_id!r}")
        scenario, scenario_bytes = entry
        doc = await request.json()
        try:
            strategy = Strategy.from_doc(doc.get("strategy", {}))
        except ValueError as exc:
            return _error_response(422, str(exc))
        record = RunRecord(
            run_id=f"r-{uuid.uuid4().hex[:12]}",
            scenario_id=scenario_id,
            strategy=strategy,
            budget=strategy.budget(),
        )
        with state.lock:
            state.runs[record.run_id] = record

        def progress(evaluations: int, budget: int):
            record.evaluations = evaluations
            record.budget = budget

        def work():
            record.state = "running"
            try:
                result = optimize(
                    scenario, strategy, cancel=record.cancel, on_progress=progress
                )
                record.result = result
                record.state = "cancelled" if record.cancel.is_set() else "done"
                state.log_run(scenario_bytes, strategy, [], result.objective_value)
            except BlendforgeError as exc:
                record.error = str(exc)
                record.state = "failed"

        state.pool.submit(work)
        return _canonical_response(run_to_doc(record), 202)

    @app.get("/runs/{run_id}")
    async def get_run(run_id: str):
        record = state.runs.get(run_id)
        if record is None:
            return _error_response(404, f"unknown run {run_id!r}")
        return _canonical_response(run_to_doc(record))

    @app.delete("/runs/{run_id}")
    async def cancel_run(run_id: str):
        record = state.runs.get(run_id)
        if record is None:
            return _error_response(404, f"unknown run {run_id!r}")
        if record.state in ("done", "cancelled", "failed"):
            return _error_response(409, f"run already {record.state}")
        record.cancel.set()
        return _canonical_response(run_to_doc(record), 202)

    @app.post("/sessions")
    async def post_session(request: Request):
        doc = await request.json()
        scenario_id = doc.get("scenario_id")
        entry = state.scenarios.get(scenario_id)
        if entry is None:
            return _error_response(404, f"unknown scenario {scenario_id!r}")
        try:
            strategy = Strategy.from_doc(doc.get("strategy", {}))
        except ValueError as exc:
            return _error_response(422, str(exc))
        session = open_session(entry[0], strategy)
        with state.lock:
            state.sessions[session.id] = session
            state.session_locks[session.id] = threading.Lock()
        state.log_run(entry[1], strategy, [], session.incumbent_result.objective_value)
        return _canonical_response(session_to_doc(session), 201)

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        session = state.sessions.get(session_id)
        if session is None:
            return _error_response(404, f"unknown session {session_id!r}")
        return _canonical_response(session_to_doc(session))

    def _parse_directives(doc):
        raw = doc.get("directives", [])
        if not isinstance(raw, list):
            raise DirectiveError("directives must be a list")
        return [directive_from_doc(item) for item in raw]

    def _session_call(session_id: str, doc: dict, mutate: bool):
        session = state.sessions.get(session_id)
        if session is None:
            return _error_response(404, f"unknown session {session_id!r}")
        lock = state.session_locks[session_id]
        if not lock.acquire(blocking=False):
            return _error_response(409, "session busy with another directive application")
        try:
            try:
                directives = _parse_directives(doc)
            except DirectiveError as exc:
                return _error_response(422, str(exc))
            try:
                if mutate:
                    outcome = guided_reoptimize(session, directives)
                else:
                    outcome = guided_preview(session, directives)
            except DirectiveConflictError as exc:
                return JSONResponse(
                    {
                        "error": "conflicting directives",
                        "reason": exc.reason,
                        "conflict": [
                            directive_to_doc(exc.first) if exc.first is not None else None,
                            directive_to_doc(exc.second) if exc.second is not None else None,
                        ],
                    },
                    status_code=422,
                )
            except DirectiveError as exc:
                return _error_response(422, str(exc))
            doc_out = outcome_to_doc(session, outcome)
            if mutate and outcome.success:
                scenario_entry = next(
                    (
                        (sc, by)
                        for sc, by in state.scenarios.values()
                        if sc is session.scenario
                    ),
                    None,
                )
                if scenario_entry is not None:
                    state.log_run(
                        scenario_entry[1],
                        session.strategy,
                        directives,
                        outcome.result.objective_value,
                    )
                doc_out["session"] = session_to_doc(session)
            return _canonical_response(doc_out)
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/directives")
    async def post_directives(session_id: str, request: Request):
        return _session_call(session_id, await request.json(), mutate=True)

    @app.post("/sessions/{session_id}/what-if")
    async def post_whatif(session_id: str, request: Request):
        return _session_call(session_id, await request.json(), mutate=False)

    @app.get("/sessions/{session_id}/analytics")
    async def get_analytics(session_id: str):
        session = state.sessions.get(session_id)
        if session is None:
            return _error_response(404, f"unknown session {session_id!r}")
        report = build_report(
            session.scenario, session.incumbent_plan, strategy=session.strategy
        )
        return _canonical_response(analytics_to_doc(report))

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def resolve_port(explicit: int | None = None) -> int:
    if explicit is not None:
        return explicit
    return int(os.environ.get(PORT_ENV_VAR, DEFAULT_PORT))
