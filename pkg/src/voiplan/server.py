"""HTTP service for interactive observation sessions.

A session wraps a validated program, a query, a budget and a utility
function.  Its state is a pure function of the observation history:
posterior, utility, remaining budget, a ranked what-if table over the
admissible observables, and the recommended next observation.  Requests
for the same session are serialized by a per-session lock; observe
requests may carry an idempotency key so that replays return the original
response without double-charging the budget.

Sessions live in memory; with ``state_dir`` set, each mutation writes a
JSON snapshot that is replayed on startup.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .model import Atom, InconsistentScenarioError, ProgramError, Theory
from .parser import parse_atom, parse_theory
from .plan import VOI_EPS, greedy_plan, plan_to_json
from .validate import validate_theory
from .voi import ActionTable, UtilitySpec, realizations, validate_observable, voi_set
from .worlds import InferenceEngine, Realization, Scenario, entropy


class Session:
    def __init__(
        self,
        sid: str,
        theory: Theory,
        query: Atom,
        budget: float,
        spec: UtilitySpec,
        program_text: str,
    ):
        self.id = sid
        self.theory = theory
        self.query = query
        self.budget = budget
        self.spec = spec
        self.program_text = program_text
        self.engine = InferenceEngine(theory)
        self.history: list[tuple[Realization, float]] = []  # realization, cost
        self.lock = threading.Lock()
        self.idempotent: dict[str, dict] = {}

    @property
    def scenario(self) -> Scenario:
        return Scenario(self.theory, tuple(r for r, _ in self.history))

    @property
    def spent(self) -> float:
        return sum(cost for _, cost in self.history)

    @property
    def remaining(self) -> float:
        return self.budget - self.spent

    def candidate_rows(self) -> list[dict]:
        scenario = self.scenario
        observed = scenario.observed_templates
        base = self.spec.of_posterior(self.engine.posterior(scenario, self.query))
        rows = []
        for position, decl in enumerate(self.theory.observables):
            if decl.template in observed:
                continue
            gain = voi_set((decl.template,), self.query, scenario, self.spec, self.engine)
            rows.append(
                {
                    "observable": str(decl.template),
                    "cost": decl.cost,
                    "voi": gain,
                    "expected_utility": base + gain,
                    "affordable": decl.cost <= self.remaining,
                    "realizations": [
                        {"label": r.label, "probability": p}
                        for r, p in realizations(decl.template, scenario, self.engine)
                    ],
                    "_position": position,
                }
            )
        # round for ranking only: symmetric observables tie up to float noise
        rows.sort(key=lambda r: (-round(r["voi"], 12), r["_position"]))
        for r in rows:
            del r["_position"]
        return rows

    def state(self) -> dict:
        scenario = self.scenario
        p = self.engine.posterior(scenario, self.query)
        rows = self.candidate_rows()
        recommendation = None
        for row in rows:
            if row["affordable"] and row["voi"] > VOI_EPS:
                recommendation = row["observable"]
                break
        leaf_reason = None
        if recommendation is None:
            if not rows:
                leaf_reason = "no-observables"
            elif not any(row["affordable"] for row in rows):
                leaf_reason = "insufficient-budget"
            else:
                leaf_reason = "no-gain"
        return {
            "id": self.id,
            "query": str(self.query),
            "posterior": p,
            "utility": self.spec.of_posterior(p),
            "entropy": entropy({True: p, False: 1.0 - p}.items()),
            "budget": {"initial": self.budget, "remaining": self.remaining, "spent": self.spent},
            "history": [
                {"observable": str(r.template), "realization": r.label, "cost": cost}
                for r, cost in self.history
            ],
            "candidates": rows,
            "recommendation": recommendation,
            "leaf_reason": leaf_reason,
        }


def create_app(state_dir: Optional[str] = None, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="voiplan sessions")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    snapshots = Path(state_dir) if state_dir else None
    if snapshots:
        snapshots.mkdir(parents=True, exist_ok=True)

    @app.exception_handler(HTTPException)
    async def _http_error(request: Request, exc: HTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": exc.status_code, "detail": exc.detail},
        )

    def persist(sess: Session) -> None:
        if snapshots is None:
            return
        payload = {
            "id": sess.id,
            "program": sess.program_text,
            "query": str(sess.query),
            "budget": sess.budget,
            "utility": sess.spec.to_json(),
            "history": [
                {"observable": str(r.template), "realization": r.label}
                for r, _ in sess.history
            ],
        }
        (snapshots / f"{sess.id}.json").write_text(json.dumps(payload))

    def forget(sid: str) -> None:
        if snapshots is not None:
            (snapshots / f"{sid}.json").unlink(missing_ok=True)

    def build_session(
        sid: str, program: str, query_text: str, budget: float, spec: UtilitySpec
    ) -> Session:
        try:
            theory = parse_theory(program)
            violations = validate_theory(theory)
            if violations:
                raise ProgramError("; ".join(str(v) for v in violations))
            query = parse_atom(query_text)
        except ProgramError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        if budget < 0:
            raise HTTPException(status_code=400, detail="budget must be nonnegative")
        sess = Session(sid, theory, query, budget, spec, program)
        for decl in theory.observables:
            check = validate_observable(decl.template, Scenario(theory), sess.engine)
            # a degenerate-but-well-formed observable (condition i) is harmless
            if not check.ok and check.condition != "i":
                raise HTTPException(
                    status_code=400,
                    detail=f"declared observable is invalid: {check.detail}",
                )
        return sess

    def apply_observation(sess: Session, template_text: str, label: str) -> None:
        try:
            template = parse_atom(template_text)
        except ProgramError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        decl = sess.theory.observable_for(template)
        if decl is None:
            raise HTTPException(status_code=409, detail=f"{template} is not declared observable")
        if template in sess.scenario.observed_templates:
            raise HTTPException(status_code=409, detail=f"{template} was already observed")
        if decl.cost > sess.remaining:
            raise HTTPException(
                status_code=402,
                detail=f"cost {decl.cost} exceeds remaining budget {sess.remaining}",
            )
        options = {r.label: (r, p) for r, p in realizations(template, sess.scenario, sess.engine)}
        picked = options.get(label)
        if picked is None or picked[1] <= 0.0:
            raise HTTPException(
                status_code=409,
                detail=f"realization {label!r} of {template} has probability zero",
            )
        sess.history.append((picked[0], decl.cost))

    def get_session(sid: str) -> Session:
        with registry_lock:
            sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(status_code=404, detail=f"unknown session {sid}")
        return sess

    @app.post("/sessions")
    def create_session(body: dict):
        program = body.get("program")
        query_text = body.get("query")
        if not program or not query_text:
            raise HTTPException(status_code=400, detail="program and query are required")
        budget = float(body.get("budget", 0))
        utility_kind = body.get("utility", "entropy")
        if utility_kind == "meu":
            try:
                spec = UtilitySpec.meu(ActionTable.from_json(body.get("actions") or {}))
            except (KeyError, TypeError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=f"bad action table: {exc}")
        elif utility_kind == "entropy":
            spec = UtilitySpec.entropy()
        else:
            raise HTTPException(status_code=400, detail=f"unknown utility {utility_kind!r}")
        sid = uuid.uuid4().hex
        sess = build_session(sid, program, query_text, budget, spec)
        try:
            state = sess.state()
        except (ProgramError, InconsistentScenarioError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        with registry_lock:
            sessions[sid] = sess
        persist(sess)
        return state

    @app.get("/sessions/{sid}/state")
    def session_state(sid: str):
        sess = get_session(sid)
        with sess.lock:
            return sess.state()

    @app.get("/sessions/{sid}/whatif")
    def session_whatif(sid: str):
        sess = get_session(sid)
        with sess.lock:
            return {"rows": sess.candidate_rows()}

    @app.post("/sessions/{sid}/observe")
    def session_observe(sid: str, body: dict):
        sess = get_session(sid)
        key = body.get("idempotency_key")
        with sess.lock:
            if key and key in sess.idempotent:
                return sess.idempotent[key]
            apply_observation(sess, body.get("observable", ""), body.get("realization", ""))
            state = sess.state()
            if key:
                sess.idempotent[key] = state
            persist(sess)
            return state

    @app.get("/sessions/{sid}/plan")
    def session_plan(sid: str):
        sess = get_session(sid)
        with sess.lock:
            tree = greedy_plan(
                sess.scenario, sess.query, sess.remaining, sess.spec, sess.engine
            )
            return plan_to_json(tree)

    @app.delete("/sessions/{sid}")
    def session_delete(sid: str):
        with registry_lock:
            if sid not in sessions:
                raise HTTPException(status_code=404, detail=f"unknown session {sid}")
            del sessions[sid]
        forget(sid)
        return {"deleted": True}

    def restore() -> None:
        if snapshots is None:
            return
        for path in sorted(snapshots.glob("*.json")):
            try:
                payload = json.loads(path.read_text())
                spec = UtilitySpec.from_json(payload.get("utility", {"kind": "entropy"}))
                sess = build_session(
                    payload["id"],
                    payload["program"],
                    payload["query"],
                    float(payload["budget"]),
                    spec,
                )
                for entry in payload.get("history", []):
                    apply_observation(sess, entry["observable"], entry["realization"])
            except (HTTPException, KeyError, ValueError, json.JSONDecodeError):
                continue  # unreadable snapshot: skip rather than fail startup
            sessions[sess.id] = sess

    restore()

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="console")

    return app
