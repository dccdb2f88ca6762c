"""HTTP facade for the web console.

Endpoints:
  POST /api/sessions           {question, backend?} -> {session_id}
  GET  /api/sessions/{id}/events  server-sent event stream of trace events
  POST /api/ga                 {plan, config?} -> {run_id}
  GET  /api/ga/{run_id}/summary   per-generation stats for histograms
  GET  /api/tables             table/column schema listing

Sessions run to completion inside the POST handler (a session is
single-threaded by design), so the event stream is a replay of the finished
trace. Malformed bodies answer 400, unknown ids 404.
"""

from __future__ import annotations

import json
import statistics
import threading
import uuid
from typing import Callable, Iterator, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse

from .agent import RulesBackend, ToolContext, default_toolkit, run_session
from .core import MofsmithError, ObjectiveKind
from .dataset import Registry
from .generator import (GAConfig, GAResult, parse_gen_plan, registry_surrogate,
                        run_ga)
from .llm import DEFAULT_TOKEN_LIMIT, Backend, TokenBudget

BACKEND_NAMES = ("rules", "scripted", "replay", "http")


def _sse(payload: dict) -> str:
    return f"data: {json.dumps(payload)}\n\n"


def _require(body: object, key: str, kind: type, default=None):
    if not isinstance(body, dict):
        raise HTTPException(status_code=400, detail="body must be a JSON object")
    if key not in body and default is not None:
        return default
    value = body.get(key)
    if not isinstance(value, kind):
        raise HTTPException(status_code=400,
                            detail=f"field {key!r} must be a {kind.__name__}")
    return value


def create_app(registry: Registry, *,
               backend_factory: Optional[Callable[[str], Backend]] = None,
               budget_limit: int = DEFAULT_TOKEN_LIMIT,
               seed: int = 0,
               webroot: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="mofsmith", docs_url=None, redoc_url=None)
    lock = threading.Lock()
    sessions: dict[str, dict] = {}
    ga_runs: dict[str, GAResult] = {}

    def make_backend(name: str) -> Backend:
        if name not in BACKEND_NAMES:
            raise HTTPException(status_code=400, detail=f"unknown backend {name!r}")
        try:
            if backend_factory is not None:
                return backend_factory(name)
            if name != "rules":
                raise ValueError(f"backend {name!r} needs server-side configuration")
            return RulesBackend(registry)
        except HTTPException:
            raise
        except Exception as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed body"})

    @app.post("/api/sessions")
    def create_session(body: dict) -> dict:
        question = _require(body, "question", str).strip()
        if not question:
            raise HTTPException(status_code=400, detail="question must be non-empty")
        backend = make_backend(_require(body, "backend", str, default="rules"))
        budget = TokenBudget(limit=budget_limit)
        context = ToolContext(registry=registry, budget=budget,
                              ga_config=GAConfig(seed=seed))
        outcome = run_session(question, default_toolkit(), backend, budget, context)
        session_id = uuid.uuid4().hex
        events = [{"session_id": session_id, "seq": e.seq, "kind": e.kind,
                   "payload": e.payload, "tokens": e.tokens}
                  for e in outcome.trace.events]
        with lock:
            sessions[session_id] = {
                "events": events,
                "label": outcome.label.value,
                "answer": outcome.answer,
                "token_used": outcome.trace.token_used,
            }
        return {"session_id": session_id}

    @app.get("/api/sessions/{session_id}/events")
    def stream_events(session_id: str) -> StreamingResponse:
        with lock:
            record = sessions.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown session")

        def generate() -> Iterator[str]:
            for event in record["events"]:
                yield _sse(event)

        return StreamingResponse(generate(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-store"})

    @app.post("/api/ga")
    def start_ga(body: dict) -> dict:
        plan_body = _require(body, "plan", dict)
        properties = plan_body.get("properties")
        objectives = plan_body.get("objectives")
        if (not isinstance(properties, list) or not properties
                or not isinstance(objectives, list) or not objectives
                or not all(isinstance(x, str) for x in properties + objectives)):
            raise HTTPException(
                status_code=400,
                detail="plan needs non-empty string lists 'properties' and 'objectives'")
        config_body = body.get("config") or {}
        if not isinstance(config_body, dict):
            raise HTTPException(status_code=400, detail="config must be an object")
        defaults = GAConfig(seed=seed)
        try:
            plan = parse_gen_plan(
                f"Property: {', '.join(properties)}\n"
                f"Objective: {', '.join(objectives)}", registry)
            topologies = config_body.get("topologies")
            config = GAConfig(
                cycles=int(config_body.get("cycles", defaults.cycles)),
                topologies=tuple(topologies) if topologies else defaults.topologies,
                parents_per_topology=int(config_body.get(
                    "parents", defaults.parents_per_topology)),
                children_per_topology=int(config_body.get(
                    "children", defaults.children_per_topology)),
                seed=int(config_body.get("seed", defaults.seed)),
            )
            pool = registry.pool()
            if pool is None:
                raise HTTPException(status_code=400,
                                    detail="no gene pool table registered")
            result = run_ga(plan, config, pool, registry_surrogate(registry))
        except HTTPException:
            raise
        except (MofsmithError, TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        run_id = uuid.uuid4().hex
        with lock:
            ga_runs[run_id] = result
        return {"run_id": run_id}

    @app.get("/api/ga/{run_id}/summary")
    def ga_summary(run_id: str) -> dict:
        with lock:
            result = ga_runs.get(run_id)
        if result is None:
            raise HTTPException(status_code=404, detail="unknown run")
        n_gens = result.config.cycles + 1
        generations = []
        for i in range(n_gens):
            members = [m for run in result.runs
                       if i < len(run.generations)
                       for m in run.generations[i].members]
            values = [[m.values[j] for m in members]
                      for j in range(len(result.plan.properties))]
            generations.append({
                "index": i,
                "count": len(members),
                "mean": [statistics.fmean(v) if v else None for v in values],
                "std": [statistics.stdev(v) if len(v) >= 2 else None
                        for v in values],
                "values": values,
                "elite_best_fitness": min(
                    (run.generations[i].elite_best.fitness for run in result.runs
                     if i < len(run.generations)), default=None),
            })
        objectives = []
        for objective in result.plan.objectives:
            entry: dict = {"kind": objective.kind.value,
                           "label": objective.describe()}
            if objective.kind is ObjectiveKind.NEAR:
                entry["target"] = objective.target
            elif objective.kind is ObjectiveKind.RANGE:
                entry["low"], entry["high"] = objective.low, objective.high
            objectives.append(entry)
        return {
            "run_id": run_id,
            "properties": list(result.plan.properties),
            "objectives": objectives,
            "best": {"gene": str(result.best.gene),
                     "values": list(result.best.values),
                     "fitness": result.best.fitness},
            "generations": generations,
        }

    @app.get("/api/tables")
    def list_tables() -> dict:
        return {
            "tables": [
                {
                    "name": name,
                    "rows": len(table.rows),
                    "key_column": table.key_column,
                    "columns": [{"header": c.header, "dtype": c.dtype.value}
                                for c in table.columns],
                }
                for name, table in sorted(registry.tables.items())
            ],
            "properties": [
                {
                    "name": prop,
                    "table": registry.lookups[prop].table,
                    "column": registry.lookups[prop].column,
                    "material_kind": registry.lookups[prop].material_kind.value,
                    "unit": registry.lookups[prop].property.unit,
                }
                for prop in registry.property_names()
            ],
        }

    if webroot:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=webroot, html=True), name="webroot")

    return app
