"""HTTP/JSON session service: models, interactive sessions, VOI queries.

Sessions walk an observation-decision sequence: observe legal variables,
commit the pending decision, repeat.  Observing a variable earlier than its
modeled placement rewrites the working diagram (the variable moves into the
current information set), so every later solve and report sees the same
structure the session has committed to.

All bodies are rendered with :func:`idvoi.jsonio.canonical_json`, so service
responses are byte-identical to CLI ``--json`` output for the same inputs,
and repeated identical queries return identical bytes.
"""

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles

from .jsonio import canonical_json
from .jtree import StrongJunctionTree, build_tree
from .model import (
    Evidence,
    InfluenceDiagram,
    ModelError,
    ModelFormatError,
    ModelValidationError,
    UnknownVariableError,
    observation_legal,
    parse_model,
    serialize_model,
)
from .solve import IMPOSSIBLE_MASS, bn_posterior, solve_tree
from .voi import voi_report


def _new_id() -> str:
    return uuid.uuid4().hex[:12]


@dataclass
class StoredModel:
    id: str
    text: str
    diagram: InfluenceDiagram
    lock: threading.Lock = field(default_factory=threading.Lock)
    # placements key -> (rewritten diagram, compiled tree), filled lazily
    compiled: dict = field(default_factory=dict)


@dataclass
class Session:
    id: str
    model_id: str
    created: float
    stage: int = 1
    evidence: list = field(default_factory=list)  # (variable, state) in commit order
    placements: dict = field(default_factory=dict)  # variable -> earlier set index
    meu: float = 0.0
    evidence_probability: float = 1.0
    lock: threading.Lock = field(default_factory=threading.Lock)
    voi_cache: dict = field(default_factory=dict)

    def evidence_map(self) -> dict:
        return dict(self.evidence)


def _rewritten(base: InfluenceDiagram, placements: dict) -> InfluenceDiagram:
    if not placements:
        return base
    sets = [list(s) for s in base.information_sets]
    for var, p in placements.items():
        sets[base.modeled_index(var)].remove(var)
        sets[p].append(var)
    return InfluenceDiagram(
        list(base.variables),
        list(base.cpts),
        list(base.utilities),
        list(base.decision_order),
        sets,
        dict(base.observation_lower_bounds),
    )


class ServiceError(Exception):
    def __init__(self, status: int, payload: dict):
        self.status = status
        self.payload = payload
        super().__init__(payload.get("error", ""))


class ServiceState:
    def __init__(self, state_dir=None):
        self.models: dict[str, StoredModel] = {}
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()
        self.state_dir = Path(state_dir) if state_dir else None
        if self.state_dir:
            (self.state_dir / "models").mkdir(parents=True, exist_ok=True)
            (self.state_dir / "sessions").mkdir(parents=True, exist_ok=True)
            self._replay()

    # -- persistence ----------------------------------------------------

    def _log(self, session: Session, record: dict) -> None:
        if not self.state_dir:
            return
        path = self.state_dir / "sessions" / f"{session.id}.jsonl"
        with path.open("a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def _replay(self) -> None:
        for path in sorted((self.state_dir / "models").glob("*.model")):
            diagram = parse_model(path.read_text())
            mid = path.stem
            self.models[mid] = StoredModel(mid, path.read_text(), diagram)
        for path in sorted((self.state_dir / "sessions").glob("*.jsonl")):
            lines = [json.loads(l) for l in path.read_text().splitlines() if l]
            if not lines or lines[0].get("op") != "create":
                raise RuntimeError(f"corrupt session log {path}")
            head = lines[0]
            session = Session(
                id=path.stem, model_id=head["model"], created=head["created"]
            )
            self.sessions[session.id] = session
            for record in lines[1:]:
                if record["op"] == "observe":
                    self.apply_observe(
                        session, record["variable"], record["state"], log=False
                    )
                elif record["op"] == "decide":
                    self.apply_decide(
                        session, record["decision"], record["action"], log=False
                    )
                else:
                    raise RuntimeError(f"corrupt session log {path}: {record}")

    # -- model store ------------------------------------------------------

    def add_model(self, text: str) -> StoredModel:
        try:
            diagram = parse_model(text)
        except ModelValidationError as e:
            raise ServiceError(
                400,
                {
                    "error": "invalid model",
                    "violations": [
                        {"rule": v.rule, "message": v.message} for v in e.violations
                    ],
                },
            ) from None
        except ModelFormatError as e:
            raise ServiceError(
                400,
                {
                    "error": "invalid model",
                    "violations": [{"rule": "format", "message": str(e)}],
                },
            ) from None
        stored = StoredModel(_new_id(), serialize_model(diagram), diagram)
        with self.lock:
            self.models[stored.id] = stored
        if self.state_dir:
            (self.state_dir / "models" / f"{stored.id}.model").write_text(stored.text)
        return stored

    def model(self, mid: str) -> StoredModel:
        stored = self.models.get(mid)
        if stored is None:
            raise ServiceError(404, {"error": f"unknown model {mid!r}"})
        return stored

    def session(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise ServiceError(404, {"error": f"unknown session {sid!r}"})
        return session

    def compiled(self, session: Session) -> tuple[InfluenceDiagram, StrongJunctionTree]:
        stored = self.model(session.model_id)
        key = tuple(sorted(session.placements.items()))
        with stored.lock:
            entry = stored.compiled.get(key)
            if entry is None:
                diagram = _rewritten(stored.diagram, session.placements)
                entry = (diagram, build_tree(diagram))
                stored.compiled[key] = entry
        return entry

    # -- session mutations ------------------------------------------------

    def create_session(self, mid: str) -> Session:
        stored = self.model(mid)
        session = Session(id=_new_id(), model_id=stored.id, created=time.time())
        self._refresh(session)
        with self.lock:
            self.sessions[session.id] = session
        self._log(
            session,
            {"op": "create", "model": stored.id, "created": session.created},
        )
        return session

    def _refresh(self, session: Session) -> None:
        diagram, tree = self.compiled(session)
        solution = solve_tree(tree, Evidence(session.evidence_map()))
        session.meu = solution.meu
        session.evidence_probability = solution.evidence_probability
        session.voi_cache.clear()

    def apply_observe(
        self, session: Session, var: str, state: str, log: bool = True
    ) -> None:
        diagram, _ = self.compiled(session)
        target = session.stage - 1
        try:
            v = diagram.variable(var)
        except UnknownVariableError:
            raise ServiceError(409, {"error": f"unknown variable {var!r}"}) from None
        if v.kind != "chance":
            raise ServiceError(409, {"error": f"{var} is not a chance variable"})
        if var in session.evidence_map():
            raise ServiceError(
                409, {"error": f"{var} is already observed in the evidence"}
            )
        ok, reason = observation_legal(diagram, var, target)
        if not ok:
            raise ServiceError(409, {"error": reason})
        if state not in v.states:
            raise ServiceError(
                409,
                {
                    "error": f"variable {var!r} has no state {state!r}; "
                    f"legal states: {', '.join(v.states)}"
                },
            )
        marginal, _ = bn_posterior(diagram, (var,), Evidence(session.evidence_map()))
        if marginal[v.states.index(state)] <= IMPOSSIBLE_MASS:
            raise ServiceError(
                409,
                {
                    "error": f"state {var}={state} has zero probability "
                    f"given the session evidence"
                },
            )
        if diagram.modeled_index(var) > target:
            session.placements[var] = target
        session.evidence.append((var, state))
        self._refresh(session)
        if log:
            self._log(session, {"op": "observe", "variable": var, "state": state})

    def apply_decide(
        self, session: Session, decision: str, action: str, log: bool = True
    ) -> None:
        diagram, _ = self.compiled(session)
        pending = self.pending(session, diagram)
        if pending is None:
            raise ServiceError(409, {"error": "all decisions are committed"})
        if decision != pending:
            raise ServiceError(
                409,
                {"error": f"decision {decision!r} is not pending (pending: {pending})"},
            )
        states = diagram.states(decision)
        if action not in states:
            raise ServiceError(
                409,
                {
                    "error": f"decision {decision!r} has no action {action!r}; "
                    f"legal actions: {', '.join(states)}"
                },
            )
        session.evidence.append((decision, action))
        session.stage += 1
        self._refresh(session)
        if log:
            self._log(session, {"op": "decide", "decision": decision, "action": action})

    # -- views -------------------------------------------------------------

    def pending(self, session: Session, diagram: InfluenceDiagram) -> str | None:
        if session.stage > diagram.n_decisions:
            return None
        return diagram.decision_order[session.stage - 1]

    def legal_candidates(self, session: Session, diagram: InfluenceDiagram) -> list:
        observed = session.evidence_map()
        target = session.stage - 1
        out = []
        for v in diagram.variables:
            if v.kind != "chance" or v.name in observed:
                continue
            ok, _ = observation_legal(diagram, v.name, target)
            if ok:
                out.append(v.name)
        return sorted(out)

    def timeline(self, diagram: InfluenceDiagram) -> list:
        # I_0, D_1, I_1, ..., D_n, I_n over the session's placements.
        out = []
        for k in range(diagram.n_decisions + 1):
            out.append(
                {"kind": "I", "index": k, "members": list(diagram.information_sets[k])}
            )
            if k < diagram.n_decisions:
                name = diagram.decision_order[k]
                out.append(
                    {
                        "kind": "D",
                        "index": k + 1,
                        "name": name,
                        "actions": list(diagram.states(name)),
                    }
                )
        return out

    def view(self, session: Session) -> dict:
        diagram, _ = self.compiled(session)
        pending = self.pending(session, diagram)
        evidence = []
        for name, state in session.evidence:
            if diagram.variable(name).kind == "decision":
                evidence.append({"kind": "decide", "decision": name, "action": state})
            else:
                evidence.append({"kind": "observe", "variable": name, "state": state})
        return {
            "id": session.id,
            "model_id": session.model_id,
            "created": session.created,
            "stage": session.stage,
            "n_decisions": diagram.n_decisions,
            "timeline": self.timeline(diagram),
            "evidence": evidence,
            "pending_decision": (
                None
                if pending is None
                else {"name": pending, "actions": list(diagram.states(pending))}
            ),
            "candidates": [
                {
                    "name": x,
                    "lower_bound": diagram.lower_bound(x),
                    "modeled": diagram.modeled_index(x),
                    "states": list(diagram.states(x)),
                }
                for x in self.legal_candidates(session, diagram)
            ],
            "meu": session.meu,
            "evidence_probability": session.evidence_probability,
        }

    # -- queries -------------------------------------------------------------

    def voi_bytes(self, session: Session, decision: str, candidates) -> str:
        diagram, _ = self.compiled(session)
        pending = self.pending(session, diagram)
        if pending is None:
            raise ServiceError(409, {"error": "all decisions are committed"})
        if decision != pending:
            raise ServiceError(
                409,
                {"error": f"decision {decision!r} is not pending (pending: {pending})"},
            )
        roster = (
            tuple(candidates)
            if candidates is not None
            else tuple(self.legal_candidates(session, diagram))
        )
        key = (tuple(session.evidence), decision, roster)
        cached = session.voi_cache.get(key)
        if cached is None:
            try:
                report = voi_report(
                    diagram, decision, roster, Evidence(session.evidence_map())
                )
            except ModelError as e:
                raise ServiceError(409, {"error": str(e)}) from None
            cached = canonical_json(report.to_jsonable())
            session.voi_cache[key] = cached
        return cached

    def recommendation(self, session: Session) -> dict:
        diagram, tree = self.compiled(session)
        pending = self.pending(session, diagram)
        if pending is None:
            raise ServiceError(409, {"error": "all decisions are committed"})
        base = session.evidence_map()
        utilities = []
        for action in diagram.states(pending):
            solution = solve_tree(tree, Evidence({**base, pending: action}))
            utilities.append({"action": action, "eu": solution.meu})
        best_index = max(
            range(len(utilities)), key=lambda j: utilities[j]["eu"]
        )
        return {
            "decision": pending,
            "best": utilities[best_index]["action"],
            "best_index": best_index,
            "utilities": utilities,
        }


def _json_response(obj, status: int = 200) -> Response:
    return Response(
        content=canonical_json(obj), status_code=status, media_type="application/json"
    )


def create_app(state_dir=None, console_dir=None) -> FastAPI:
    state = ServiceState(state_dir)
    app = FastAPI(title="idvoi service")
    app.state.service = state

    @app.exception_handler(ServiceError)
    async def service_error(_request, exc: ServiceError):
        return _json_response(exc.payload, exc.status)

    @app.post("/models")
    async def create_model(request: Request):
        text = (await request.body()).decode("utf-8", errors="replace")
        stored = state.add_model(text)
        return _json_response({"id": stored.id}, 201)

    @app.get("/models/{mid}")
    async def get_model(mid: str):
        stored = state.model(mid)
        return Response(content=stored.text, media_type="application/json")

    @app.post("/sessions")
    async def create_session(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise ServiceError(400, {"error": "body must be a JSON object"}) from None
        mid = body.get("model_id") if isinstance(body, dict) else None
        if not isinstance(mid, str):
            raise ServiceError(400, {"error": "model_id required"})
        session = state.create_session(mid)
        return _json_response(state.view(session), 201)

    @app.get("/sessions/{sid}")
    async def get_session(sid: str):
        session = state.session(sid)
        with session.lock:
            return _json_response(state.view(session))

    @app.post("/sessions/{sid}/steps")
    async def post_step(sid: str, request: Request):
        session = state.session(sid)
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise ServiceError(400, {"error": "body must be a JSON object"}) from None
        if not isinstance(body, dict) or len(body) != 1:
            raise ServiceError(
                400, {"error": "step must have exactly one of observe|decide"}
            )
        with session.lock:
            if "observe" in body:
                step = body["observe"]
                state.apply_observe(
                    session, str(step.get("variable")), str(step.get("state"))
                )
            elif "decide" in body:
                step = body["decide"]
                state.apply_decide(
                    session, str(step.get("decision")), str(step.get("action"))
                )
            else:
                raise ServiceError(
                    400, {"error": "step must have exactly one of observe|decide"}
                )
            return _json_response(state.view(session))

    @app.get("/sessions/{sid}/voi")
    async def get_voi(sid: str, decision: str = "", candidates: str | None = None):
        session = state.session(sid)
        roster = None
        if candidates is not None:
            roster = [c.strip() for c in candidates.split(",") if c.strip()]
        with session.lock:
            body = state.voi_bytes(session, decision, roster)
        return Response(content=body, media_type="application/json")

    @app.get("/sessions/{sid}/recommendation")
    async def get_recommendation(sid: str):
        session = state.session(sid)
        with session.lock:
            return _json_response(state.recommendation(session))

    if console_dir is None:
        default_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        console_dir = default_dir if default_dir.is_dir() else None
    if console_dir is not None:
        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app


def run_server(host: str = "127.0.0.1", port: int = 8000, state_dir=None) -> None:
    import uvicorn

    uvicorn.run(create_app(state_dir=state_dir), host=host, port=port)
