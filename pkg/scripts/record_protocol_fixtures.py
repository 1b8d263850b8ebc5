#!/usr/bin/env python3
"""Records canonical request/response sequences against the live service.

The recordings under tests/fixtures/protocol/ back two suites: the service
replay test (responses must stay byte-identical up to the session id) and
the UI contract tests, which drive the frontend against the same traffic
without a server.  Session ids are normalized to the placeholder "SID".
"""

from __future__ import annotations

import json
import sys
import tempfile
import threading
import urllib.error
import urllib.request
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from fmgen.service import make_server  # noqa: E402

FIXTURES = ROOT / "fixtures"
OUT_DIR = ROOT / "tests" / "fixtures" / "protocol"


class Recorder:
    def __init__(self, port: int, output_root: str):
        self.port = port
        self.output_root = output_root
        self.steps: list[dict] = []
        self.session_id: str | None = None

    def request(self, method: str, path: str, body: dict | None = None) -> dict:
        url = f"http://127.0.0.1:{self.port}{path}"
        data = json.dumps(body).encode() if body is not None else None
        req = urllib.request.Request(url, data=data, method=method)
        if data:
            req.add_header("Content-Type", "application/json")
        try:
            with urllib.request.urlopen(req) as resp:
                status, raw = resp.status, resp.read().decode()
                content_type = resp.headers.get("Content-Type", "")
        except urllib.error.HTTPError as e:
            status, raw = e.code, e.read().decode()
            content_type = e.headers.get("Content-Type", "")
        if "json" in content_type and raw:
            payload = {"status": status, "body": json.loads(raw)}
        else:
            payload = {"status": status, "text": raw}
        if self.session_id is None and isinstance(payload.get("body"), dict):
            self.session_id = payload["body"].get("id")
        self.steps.append({
            "request": {"method": method, "path": path, "body": body},
            "response": payload,
        })
        return payload

    def dump(self, name: str) -> None:
        blob = json.dumps({"name": name, "steps": self.steps}, indent=2, sort_keys=True)
        if self.session_id:
            blob = blob.replace(self.session_id, "SID")
        blob = blob.replace(self.output_root, "OUT_ROOT")
        OUT_DIR.mkdir(parents=True, exist_ok=True)
        (OUT_DIR / f"{name}.json").write_text(blob + "\n", encoding="utf-8")
        print(f"recorded {name}: {len(self.steps)} steps")


def view_sources() -> dict:
    return {
        "model": (FIXTURES / "view.fm").read_text(),
        "frames": (FIXTURES / "view.frame").read_text(),
        "rules": (FIXTURES / "view.rules").read_text(),
    }


def record_happy_path(port: int, output_root: str) -> None:
    r = Recorder(port, output_root)
    r.request("POST", "/sessions", view_sources())
    sid = r.session_id
    r.request("GET", f"/sessions/{sid}/spec?mode=preview")
    r.request("POST", f"/sessions/{sid}/decisions", {"feature": "Zoom", "value": "selected"})
    r.request("POST", f"/sessions/{sid}/decisions", {"feature": "ToolBarCheck", "value": "deselected"})
    r.request("POST", f"/sessions/{sid}/decisions", {"feature": "Zoom100", "value": "selected"})
    r.request("POST", f"/sessions/{sid}/undo")
    r.request("POST", f"/sessions/{sid}/decisions", {"feature": "StatusBar", "value": "deselected"})
    r.request("POST", f"/sessions/{sid}/generate", {"policy": "default-off"})
    r.request("GET", f"/sessions/{sid}/widgets")
    r.dump("view_happy_path")


CONFLICT_MODEL = """\
feature Gadget {
  optional Alpha
  optional Beta
  optional Combo
}
requires Combo -> Alpha
requires Combo -> Beta
excludes Alpha Beta
"""


def record_conflict(port: int, output_root: str) -> None:
    # Combo's control stays enabled (nothing forces it), yet selecting it
    # is contradictory: the conflict arrives through a legitimate click.
    r = Recorder(port, output_root)
    r.request("POST", "/sessions", {"model": CONFLICT_MODEL, "frames": "", "rules": ""})
    sid = r.session_id
    r.request("POST", f"/sessions/{sid}/decisions", {"feature": "Combo", "value": "selected"})
    r.request("GET", f"/sessions/{sid}/widgets")
    r.dump("conflict_gadget")


def record_complete_generate(port: int, output_root: str) -> None:
    r = Recorder(port, output_root)
    r.request("POST", "/sessions", view_sources())
    sid = r.session_id
    for feature, value in [
        ("View", "selected"),
        ("ToolBarCheck", "selected"),
        ("StatusBar", "deselected"),
        ("Zoom", "deselected"),
    ]:
        r.request("POST", f"/sessions/{sid}/decisions", {"feature": feature, "value": value})
    r.request("GET", f"/sessions/{sid}/spec?mode=final")
    r.request("POST", f"/sessions/{sid}/generate", {"policy": "strict"})
    r.request("DELETE", f"/sessions/{sid}")
    r.dump("view_complete_generate")


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        server = make_server(0, tmp)
        port = server.server_address[1]
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            record_happy_path(port, tmp)
            record_conflict(port, tmp)
            record_complete_generate(port, tmp)
        finally:
            server.shutdown()
            server.server_close()


if __name__ == "__main__":
    main()
