"""Session-oriented HTTP interface for interactive specialization.

Each session owns a parsed model, frame library, rule set, and the current
configuration.  The engine itself is pure, so the only shared mutable
state is the session table; requests for one session are serialized by a
per-session lock.  Error responses never change session state.

Endpoints (JSON bodies, see docs/protocol.md):
  POST   /sessions                    {model, frames, rules}
  GET    /sessions/{id}/widgets
  POST   /sessions/{id}/decisions     {feature, value}
  POST   /sessions/{id}/undo
  GET    /sessions/{id}/spec?mode=preview|final
  POST   /sessions/{id}/generate      {policy}
  DELETE /sessions/{id}
"""

from __future__ import annotations

import json
import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .config import (
    Conflict,
    Configuration,
    EngineError,
    apply_decision,
    decision_from_name,
    finalize,
    init_config,
    retract_decision,
    status,
)
from .frames import FrameError, FrameLibrary, parse_frames
from .generator import GenerateError, RuleError, RuleSet, generate, parse_rules
from .model import FeatureDiagram, ModelError, parse_model
from .specxml import emit_spec, emit_spec_preview
from .widgets import WidgetTree, compute_enablement, derive_notifications, serialize_tree, transform

SESSION_TTL_SECONDS = 1800.0


class ApiError(Exception):
    def __init__(self, http_status: int, code: str, message: str, reasons: list[str] | None = None):
        super().__init__(message)
        self.http_status = http_status
        self.code = code
        self.reasons = reasons or []

    def payload(self) -> dict:
        return {"code": self.code, "message": str(self), "reasons": self.reasons}


def _conflict_error(conflict: Conflict) -> ApiError:
    error = ApiError(409, "conflict", conflict.render().splitlines()[0], conflict.reasons())
    error.conflict = conflict
    return error


@dataclass
class Session:
    id: str
    diagram: FeatureDiagram
    library: FrameLibrary
    rules: RuleSet
    tree: WidgetTree
    configuration: Configuration
    decision_order: list[str] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_access: float = field(default_factory=time.monotonic)


class SessionStore:
    def __init__(self, ttl: float = SESSION_TTL_SECONDS):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._ttl = ttl

    def create(self, session: Session) -> None:
        with self._lock:
            self._sweep()
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            self._sweep()
            session = self._sessions.get(session_id)
            if session is None:
                raise ApiError(404, "unknown-session", f"no session {session_id!r}")
            session.last_access = time.monotonic()
            return session

    def remove(self, session_id: str) -> None:
        with self._lock:
            if session_id not in self._sessions:
                raise ApiError(404, "unknown-session", f"no session {session_id!r}")
            del self._sessions[session_id]

    def _sweep(self) -> None:
        cutoff = time.monotonic() - self._ttl
        for sid in [s for s, session in self._sessions.items() if session.last_access < cutoff]:
            del self._sessions[sid]


def _session_payload(session: Session, extra: dict | None = None) -> dict:
    c = session.configuration
    result = status(c)
    payload = {
        "id": session.id,
        "widgets": json.loads(serialize_tree(session.tree)),
        "states": c.states_by_name(),
        "enablement": compute_enablement(session.tree, c),
        "status": {
            "complete": result.complete,
            "obligations": [
                {"kind": ob.kind, "subject": ob.subject, "members": list(ob.members)}
                for ob in result.obligations
            ],
        },
    }
    payload.update(extra or {})
    return payload


class Api:
    """Protocol logic, HTTP-framework free so tests can call it directly."""

    def __init__(self, output_root: str | Path = "generated", ttl: float = SESSION_TTL_SECONDS):
        self.store = SessionStore(ttl)
        self.output_root = Path(output_root)

    def create_session(self, body: dict) -> dict:
        for key in ("model",):
            if not isinstance(body.get(key), str):
                raise ApiError(400, "bad-request", f"body needs a {key!r} string")
        try:
            diagram = parse_model(body["model"])
            library = parse_frames(body.get("frames", ""))
            rules = parse_rules(body.get("rules", ""), diagram, library)
            configuration = init_config(diagram)
        except (ModelError, FrameError, RuleError, EngineError) as e:
            raise ApiError(400, "invalid-input", str(e)) from None
        session = Session(
            id=uuid.uuid4().hex,
            diagram=diagram,
            library=library,
            rules=rules,
            tree=transform(diagram),
            configuration=configuration,
        )
        self.store.create(session)
        return _session_payload(session)

    def widgets(self, session_id: str) -> dict:
        session = self.store.get(session_id)
        with session.lock:
            return _session_payload(session)

    def post_decision(self, session_id: str, body: dict) -> dict:
        session = self.store.get(session_id)
        feature = body.get("feature")
        value_name = body.get("value")
        if not isinstance(feature, str) or not isinstance(value_name, str):
            raise ApiError(400, "bad-request", "body needs 'feature' and 'value'")
        try:
            value = decision_from_name(value_name)
        except EngineError as e:
            raise ApiError(400, "bad-request", str(e)) from None
        with session.lock:
            if not session.diagram.has_feature(feature):
                raise ApiError(400, "unknown-feature", f"no feature {feature!r}")
            outcome = apply_decision(session.configuration, feature, value)
            if isinstance(outcome, Conflict):
                raise _conflict_error(outcome)
            new_config, report = outcome
            was_decided = feature in session.configuration.user_decisions
            session.configuration = new_config
            if not was_decided:
                session.decision_order.append(feature)
            notifications = derive_notifications(session.tree, report, feature, value)
            return _session_payload(session, {
                "changed": [
                    {"feature": name, "from": _state(old), "to": _state(new)}
                    for name, old, new in report.changed
                ],
                "notifications": [
                    {
                        "trigger": {"feature": n.trigger[0], "value": _state(n.trigger[1])},
                        "panel": n.panel,
                        "cross_panel": n.cross_panel,
                        "affected": [{"feature": f, "state": _state(s)} for f, s in n.affected],
                    }
                    for n in notifications
                ],
            })

    def undo(self, session_id: str) -> dict:
        session = self.store.get(session_id)
        with session.lock:
            if not session.decision_order:
                raise ApiError(400, "nothing-to-undo", "no decisions to undo")
            feature = session.decision_order[-1]
            session.configuration = retract_decision(session.configuration, feature)
            session.decision_order.pop()
            return _session_payload(session, {"retracted": feature})

    def spec(self, session_id: str, mode: str) -> str:
        session = self.store.get(session_id)
        with session.lock:
            if mode == "preview":
                return emit_spec_preview(session.configuration)
            if mode != "final":
                raise ApiError(400, "bad-request", f"unknown spec mode {mode!r}")
            result = status(session.configuration)
            if not result.complete:
                raise ApiError(
                    409, "incomplete",
                    "configuration is not complete",
                    [ob.render() for ob in result.obligations],
                )
            return emit_spec(session.configuration)

    def run_generate(self, session_id: str, body: dict) -> dict:
        session = self.store.get(session_id)
        policy = body.get("policy", "strict")
        if policy not in ("strict", "default-off"):
            raise ApiError(400, "bad-request", f"unknown policy {policy!r}")
        with session.lock:
            final = finalize(session.configuration, policy)
            if isinstance(final, Conflict):
                raise ApiError(409, "incomplete", "configuration cannot be finalized", final.reasons())
            out_dir = self.output_root / session.id
            try:
                manifest = generate(
                    session.diagram, final, session.library, session.rules, out_dir
                )
            except (GenerateError, RuleError, FrameError) as e:
                raise ApiError(409, "generate-failed", str(e)) from None
            return {
                "output_dir": str(out_dir),
                "manifest": {
                    "inputs": manifest.inputs_digest,
                    "entries": [
                        {"path": p, "bytes": size, "digest": digest}
                        for p, size, digest in manifest.entries
                    ],
                },
            }

    def delete_session(self, session_id: str) -> None:
        self.store.remove(session_id)


def _state(value: bool | None) -> str:
    if value is None:
        return "undecided"
    return "selected" if value else "deselected"


_ROUTES = [
    ("POST", re.compile(r"^/sessions$"), "create"),
    ("GET", re.compile(r"^/sessions/([0-9a-f]+)/widgets$"), "widgets"),
    ("POST", re.compile(r"^/sessions/([0-9a-f]+)/decisions$"), "decision"),
    ("POST", re.compile(r"^/sessions/([0-9a-f]+)/undo$"), "undo"),
    ("GET", re.compile(r"^/sessions/([0-9a-f]+)/spec$"), "spec"),
    ("POST", re.compile(r"^/sessions/([0-9a-f]+)/generate$"), "generate"),
    ("DELETE", re.compile(r"^/sessions/([0-9a-f]+)$"), "delete"),
]


class _Handler(BaseHTTPRequestHandler):
    api: Api  # set by make_server

    def log_message(self, fmt: str, *args) -> None:  # keep test output clean
        pass

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        raw = self.rfile.read(length)
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError:
            raise ApiError(400, "bad-request", "body is not valid JSON") from None
        if not isinstance(parsed, dict):
            raise ApiError(400, "bad-request", "body must be a JSON object")
        return parsed

    def _send_json(self, http_status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(http_status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _send_text(self, http_status: int, text: str, content_type: str = "application/xml") -> None:
        data = text.encode("utf-8")
        self.send_response(http_status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _dispatch(self, method: str) -> None:
        path, _, query_string = self.path.partition("?")
        query = dict(part.split("=", 1) for part in query_string.split("&") if "=" in part)
        try:
            for route_method, pattern, name in _ROUTES:
                if route_method != method:
                    continue
                m = pattern.match(path)
                if not m:
                    continue
                if name == "create":
                    self._send_json(200, self.api.create_session(self._body()))
                elif name == "widgets":
                    self._send_json(200, self.api.widgets(m.group(1)))
                elif name == "decision":
                    self._send_json(200, self.api.post_decision(m.group(1), self._body()))
                elif name == "undo":
                    self._send_json(200, self.api.undo(m.group(1)))
                elif name == "spec":
                    mode = query.get("mode", "preview")
                    self._send_text(200, self.api.spec(m.group(1), mode))
                elif name == "generate":
                    self._send_json(200, self.api.run_generate(m.group(1), self._body()))
                elif name == "delete":
                    self.api.delete_session(m.group(1))
                    self.send_response(204)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                return
            raise ApiError(404, "not-found", f"no route for {method} {path}")
        except ApiError as e:
            payload = e.payload()
            if hasattr(e, "conflict"):
                conflict: Conflict = e.conflict
                if conflict.rejected is not None:
                    payload["rejected"] = {
                        "feature": conflict.rejected[0],
                        "value": _state(conflict.rejected[1]),
                    }
            self._send_json(e.http_status, payload)

    def do_GET(self) -> None:
        self._dispatch("GET")

    def do_POST(self) -> None:
        self._dispatch("POST")

    def do_DELETE(self) -> None:
        self._dispatch("DELETE")


def make_server(port: int = 0, output_root: str | Path = "generated") -> ThreadingHTTPServer:
    api = Api(output_root)
    handler = type("Handler", (_Handler,), {"api": api})
    server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    server.api = api  # type: ignore[attr-defined]
    return server
