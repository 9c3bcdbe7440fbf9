"""Shared fixtures: canned upstream servers and a live proxy instance."""
from __future__ import annotations

import gzip
import threading
from dataclasses import dataclass, field
from http.client import HTTPConnection
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from linkfence.config import ProxyConfig
from linkfence.engine import FilterEngine
from linkfence.mgmt import MgmtServer
from linkfence.proxy import ProxyServer
from linkfence.urls import parse_absolute


@dataclass
class Route:
    body: bytes
    content_type: str = "text/html; charset=utf-8"
    status: int = 200
    headers: dict[str, str] = field(default_factory=dict)
    gzip_body: bool = False


class Backend:
    """Tiny origin server with per-path canned responses."""

    def __init__(self):
        self.routes: dict[str, Route] = {}
        self.requests: list[tuple[str, str, dict]] = []
        backend = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, *args):
                pass

            def _serve(self):
                backend.requests.append(
                    (self.command, self.path, dict(self.headers.items()))
                )
                route = backend.routes.get(self.path.split("?")[0])
                if route is None:
                    self.send_response(404)
                    self.send_header("Content-Length", "0")
                    self.send_header("Connection", "close")
                    self.end_headers()
                    return
                body = gzip.compress(route.body) if route.gzip_body else route.body
                self.send_response(route.status)
                self.send_header("Content-Type", route.content_type)
                if route.gzip_body:
                    self.send_header("Content-Encoding", "gzip")
                for name, value in route.headers.items():
                    self.send_header(name, value)
                self.send_header("Content-Length", str(len(body)))
                self.send_header("Connection", "close")
                self.end_headers()
                if self.command != "HEAD":
                    self.wfile.write(body)

            do_GET = do_POST = do_HEAD = _serve

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.server.daemon_threads = True
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    @property
    def address(self) -> tuple[str, int]:
        return ("127.0.0.1", self.server.server_address[1])

    def add(self, path: str, body: str | bytes, **kwargs) -> Route:
        data = body.encode("utf-8") if isinstance(body, str) else body
        route = Route(body=data, **kwargs)
        self.routes[path] = route
        return route

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@dataclass
class ProxyUnderTest:
    engine: FilterEngine
    proxy: ProxyServer
    mgmt: MgmtServer | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.proxy.bound_address

    @property
    def mgmt_address(self) -> tuple[str, int]:
        return self.mgmt.bound_address

    def request(self, method: str, url: str, headers: dict | None = None, body: bytes = b""):
        """Absolute-form request through the proxy; returns (status, headers, body)."""
        conn = HTTPConnection(*self.address, timeout=10)
        try:
            conn.putrequest(method, url, skip_host=True, skip_accept_encoding=True)
            target = parse_absolute(url)
            sent = {k.lower() for k in (headers or {})}
            if "host" not in sent:
                conn.putheader("Host", target.host)
            for name, value in (headers or {}).items():
                conn.putheader(name, value)
            if body:
                conn.putheader("Content-Length", str(len(body)))
            conn.endheaders(body if body else None)
            resp = conn.getresponse()
            data = resp.read()
            return resp.status, {k.lower(): v for k, v in resp.getheaders()}, data
        finally:
            conn.close()

    def get(self, url: str, referer: str | None = None, **headers):
        hdrs = dict(headers)
        if referer is not None:
            hdrs["Referer"] = referer
        return self.request("GET", url, hdrs)

    def mgmt_request(self, method: str, path: str, payload: dict | None = None):
        import json

        conn = HTTPConnection(*self.mgmt_address, timeout=10)
        try:
            body = json.dumps(payload).encode() if payload is not None else None
            headers = {"Content-Type": "application/json"} if body else {}
            conn.request(method, path, body=body, headers=headers)
            resp = conn.getresponse()
            raw = resp.read()
            doc = json.loads(raw) if raw and resp.headers.get("Content-Type", "").startswith("application/json") else raw
            return resp.status, doc
        finally:
            conn.close()

    def close(self):
        self.proxy.shutdown()
        self.proxy.server_close()
        if self.mgmt is not None:
            self.mgmt.shutdown()
            self.mgmt.server_close()


@pytest.fixture
def backend():
    server = Backend()
    yield server
    server.close()


@pytest.fixture
def second_backend():
    server = Backend()
    yield server
    server.close()


@pytest.fixture
def make_proxy():
    running: list[ProxyUnderTest] = []

    def build(aliases: dict[str, tuple[str, int]], with_mgmt: bool = False, **cfg_kwargs) -> ProxyUnderTest:
        cfg = ProxyConfig(
            listen=("127.0.0.1", 0),
            mgmt_listen=("127.0.0.1", 0),
            host_aliases=aliases,
            **cfg_kwargs,
        )
        engine = FilterEngine(cfg)
        proxy = ProxyServer(engine)
        proxy.serve_in_thread()
        mgmt = None
        if with_mgmt:
            mgmt = MgmtServer(engine)
            mgmt.serve_in_thread()
        put = ProxyUnderTest(engine=engine, proxy=proxy, mgmt=mgmt)
        running.append(put)
        return put

    yield build
    for put in running:
        put.close()
