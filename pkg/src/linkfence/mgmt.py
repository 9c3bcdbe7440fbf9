"""Management HTTP service: alert queue, rules CRUD, snapshots, config.

Plain JSON over HTTP on a loopback port; the operator console is a static
bundle served at /console. GET /api/alerts?wait=1 long-polls until a pending
alert exists (or ~25 s elapse) so the console sees new alerts immediately.
Every JSON response carries schema_version.
"""
from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from .engine import FilterEngine
from .rules import ALLOW, DENY, KIND_DOMAIN, KIND_EXACT, KIND_PREFIX, RulePattern

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
LONG_POLL_SECS = 25.0


class MgmtHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "linkfence-mgmt"

    @property
    def engine(self) -> FilterEngine:
        return self.server.engine

    def log_message(self, fmt, *args):
        logger.debug("mgmt %s %s", self.address_string(), fmt % args)

    # -- plumbing ------------------------------------------------------------

    def _json(self, status: int, payload: dict):
        payload = {"schema_version": SCHEMA_VERSION, **payload}
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)

    def _error(self, status: int, message: str):
        self._json(status, {"error": message})

    def _read_json(self) -> dict | None:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError:
            return None
        return obj if isinstance(obj, dict) else None

    # -- routing ---------------------------------------------------------------

    def do_GET(self):
        url = urlsplit(self.path)
        parts = [p for p in url.path.split("/") if p]
        if parts[:2] == ["api", "alerts"] and len(parts) == 2:
            query = parse_qs(url.query)
            if query.get("wait", ["0"])[0] in ("1", "true"):
                pending = self.engine.alerts.wait_for_pending(LONG_POLL_SECS)
            else:
                pending = self.engine.alerts.pending()
            self._json(200, {"alerts": [t.as_dict() for t in pending]})
        elif parts == ["api", "rules"]:
            self._json(200, {"rules": self.engine.rules_snapshot()})
        elif parts == ["api", "contexts"]:
            self._json(200, {"contexts": self.engine.contexts_snapshot()})
        elif parts == ["api", "config"]:
            self._json(200, {"config": self.engine.config_snapshot()})
        elif parts == ["api", "stats"]:
            self._json(200, {"stats": self.engine.stats_snapshot()})
        elif not parts or parts[0] == "console":
            self._serve_console(parts[1:])
        else:
            self._error(404, "no such endpoint")

    def do_POST(self):
        parts = [p for p in urlsplit(self.path).path.split("/") if p]
        if len(parts) == 4 and parts[:2] == ["api", "alerts"] and parts[3] == "decision":
            self._decide_alert(parts[2])
        elif parts == ["api", "rules"]:
            self._create_rule()
        else:
            self._error(404, "no such endpoint")

    def do_PATCH(self):
        parts = [p for p in urlsplit(self.path).path.split("/") if p]
        if parts == ["api", "config"]:
            body = self._read_json()
            if body is None:
                return self._error(400, "invalid JSON body")
            if "threshold_bits" in body:
                try:
                    self.engine.set_threshold_bits(int(body["threshold_bits"]))
                except (TypeError, ValueError) as exc:
                    return self._error(400, f"bad threshold_bits: {exc}")
            if "alert_timeout_secs" in body:
                try:
                    self.engine.config.alert_timeout_secs = float(body["alert_timeout_secs"])
                except (TypeError, ValueError) as exc:
                    return self._error(400, f"bad alert_timeout_secs: {exc}")
            self._json(200, {"config": self.engine.config_snapshot()})
        else:
            self._error(404, "no such endpoint")

    def do_DELETE(self):
        parts = [p for p in urlsplit(self.path).path.split("/") if p]
        if len(parts) == 3 and parts[:2] == ["api", "rules"]:
            if self.engine.store.remove(parts[2]):
                self._json(200, {"deleted": parts[2]})
            else:
                self._error(404, "no such rule")
        else:
            self._error(404, "no such endpoint")

    # -- handlers ------------------------------------------------------------

    def _decide_alert(self, ticket_id: str):
        body = self._read_json()
        if body is None:
            return self._error(400, "invalid JSON body")
        action = body.get("action")
        scope = body.get("scope")
        if action not in (ALLOW, DENY) or scope not in ("temporary", "permanent"):
            return self._error(400, "need action=allow|deny and scope=temporary|permanent")
        pattern = None
        if "pattern" in body:
            pattern = _parse_pattern(body["pattern"])
            if pattern is None:
                return self._error(400, "bad pattern")
        try:
            ticket = self.engine.decide_ticket(ticket_id, action, scope, pattern)
        except KeyError:
            return self._error(404, "no such alert")
        except ValueError as exc:
            return self._error(409, str(exc))
        self._json(200, {"ticket": ticket.as_dict()})

    def _create_rule(self):
        body = self._read_json()
        if body is None:
            return self._error(400, "invalid JSON body")
        pattern = _parse_pattern(body.get("pattern"))
        action = body.get("action")
        if pattern is None or action not in (ALLOW, DENY):
            return self._error(400, "need pattern{kind,value} and action=allow|deny")
        rule = self.engine.store.add_permanent(pattern, action)
        self._json(201, {"rule": rule.as_dict()})

    def _serve_console(self, parts: list[str]):
        root = self.engine.config.console_dir
        if root is None:
            return self._error(404, "console assets not configured")
        root = Path(root).resolve()
        target = (root / Path(*parts)) if parts else root / "index.html"
        target = target.resolve()
        if root not in target.parents and target != root:
            return self._error(404, "not found")
        if target.is_dir():
            target = target / "index.html"
        if not target.is_file():
            return self._error(404, "not found")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


def _parse_pattern(obj) -> RulePattern | None:
    if not isinstance(obj, dict):
        return None
    kind = obj.get("kind")
    value = obj.get("value")
    if kind not in (KIND_EXACT, KIND_PREFIX, KIND_DOMAIN) or not isinstance(value, str):
        return None
    return RulePattern(kind, value)


class MgmtServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, engine: FilterEngine):
        self.engine = engine
        super().__init__(engine.config.mgmt_listen, MgmtHandler)

    @property
    def bound_address(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]

    def serve_in_thread(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, name="linkfence-mgmt", daemon=True)
        thread.start()
        return thread
