"""HTTP forward proxy: intercepts every request, consults the engine,
rewrites HTML responses, and tunnels CONNECT opaquely.

Plain-HTTP requests arrive in absolute form (origin form plus Host also
works). Each connection gets its own thread, so requests held for an
operator decision stall nothing else. Bodies are buffered fully before
rewriting, bounded by max_body_bytes; oversized responses stream through
untouched.
"""
from __future__ import annotations

import gzip
import logging
import select
import socket
import threading
import zlib
from http.client import HTTPConnection, HTTPException
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .config import ProxyConfig
from .engine import CSS_TYPES, DENY, FORWARD, HTML_TYPES, FilterEngine, ProxyRequest
from .urls import AbsoluteUrl, parse_absolute

logger = logging.getLogger(__name__)

HOP_BY_HOP = frozenset(
    {
        "connection",
        "keep-alive",
        "proxy-authenticate",
        "proxy-authorization",
        "proxy-connection",
        "te",
        "trailer",
        "transfer-encoding",
        "upgrade",
    }
)

_TUNNEL_CHUNK = 65536


def _split_content_type(value: str) -> tuple[str, str | None]:
    """("text/html; charset=utf-8") -> ("text/html", "utf-8")."""
    parts = [p.strip() for p in value.split(";")]
    main = parts[0].lower()
    charset = None
    for p in parts[1:]:
        if p.lower().startswith("charset="):
            charset = p.split("=", 1)[1].strip().strip('"').strip("'")
    return main, charset


def _decode_body(body: bytes, charset: str | None) -> tuple[str, str]:
    """Decode with the declared charset, falling back to byte-preserving
    Latin-1; returns (text, codec used for re-encoding)."""
    for codec in filter(None, (charset, "utf-8")):
        try:
            return body.decode(codec), codec
        except (UnicodeDecodeError, LookupError):
            continue
    return body.decode("latin-1"), "latin-1"


def _decompress(body: bytes, encoding: str) -> bytes:
    encoding = encoding.lower().strip()
    if encoding in ("", "identity"):
        return body
    if encoding == "gzip":
        return gzip.decompress(body)
    if encoding == "deflate":
        try:
            return zlib.decompress(body)
        except zlib.error:
            return zlib.decompress(body, -zlib.MAX_WBITS)  # raw-deflate servers
    raise ValueError(f"unsupported content-encoding {encoding!r}")


class ProxyHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "linkfence"

    @property
    def engine(self) -> FilterEngine:
        return self.server.engine

    @property
    def cfg(self) -> ProxyConfig:
        return self.server.engine.config

    def log_message(self, fmt, *args):
        logger.debug("%s %s", self.address_string(), fmt % args)

    # One handler for every plain-HTTP method.
    def _method(self):
        self._relay()

    do_GET = _method
    do_POST = _method
    do_HEAD = _method
    do_PUT = _method
    do_DELETE = _method
    do_OPTIONS = _method
    do_PATCH = _method

    # -- request assembly ----------------------------------------------------

    def _request_url(self) -> AbsoluteUrl | None:
        if self.path.startswith("http://") or self.path.startswith("https://"):
            return parse_absolute(self.path)
        host = self.headers.get("Host")
        if not host:
            return None
        return parse_absolute(f"http://{host}{self.path}")

    def _build_request(self) -> ProxyRequest | None:
        url = self._request_url()
        if url is None:
            return None
        referrer = None
        raw_referrer = self.headers.get("Referer")
        if raw_referrer:
            referrer = parse_absolute(raw_referrer)  # unparseable -> absent
        length = int(self.headers.get("Content-Length") or 0)
        body = self.rfile.read(length) if length > 0 else b""
        return ProxyRequest(
            method=self.command,
            url=url,
            referrer=referrer,
            headers=list(self.headers.items()),
            body=body,
        )

    # -- responses -----------------------------------------------------------

    def _send_simple(self, status: int, text: str, extra: dict[str, str] | None = None):
        body = text.encode("utf-8")
        self.send_response(status)
        for name, value in (extra or {}).items():
            self.send_header(name, value)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Connection", "close")
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(body)
        self.close_connection = True

    def _send_denied(self, reason: str):
        self._send_simple(403, f"request blocked: {reason}\n", {"X-Filter-Reason": reason})

    # -- the relay -----------------------------------------------------------

    def _relay(self):
        req = self._build_request()
        if req is None:
            self._send_simple(400, "malformed proxy request\n")
            return
        action = self.engine.handle_request(req)
        if action.kind == DENY:
            self._send_denied(action.reason)
            return
        assert action.kind == FORWARD
        try:
            self._forward_upstream(req)
        except (OSError, HTTPException) as exc:
            logger.warning("upstream failure for %s: %s", req.url, exc)
            self._send_simple(502, f"upstream connection failure: {exc}\n")

    def _upstream_addr(self, url: AbsoluteUrl) -> tuple[str, int]:
        return self.cfg.host_aliases.get(url.host, (url.host, url.port))

    def _forward_upstream(self, req: ProxyRequest):
        host, port = self._upstream_addr(req.url)
        conn = HTTPConnection(host, port, timeout=self.cfg.upstream_timeout_secs)
        try:
            path = req.url.path + (f"?{req.url.query}" if req.url.query else "")
            conn.putrequest(req.method, path, skip_host=True, skip_accept_encoding=True)
            saw_host = False
            for name, value in req.headers:
                lname = name.lower()
                if lname in HOP_BY_HOP or lname == "accept-encoding":
                    continue
                if lname == "host":
                    saw_host = True
                conn.putheader(name, value)
            if not saw_host:
                conn.putheader("Host", req.url.host)
            # Only encodings the rewriter can undo.
            conn.putheader("Accept-Encoding", "gzip, deflate")
            conn.putheader("Connection", "close")
            conn.endheaders(req.body if req.body else None)
            resp = conn.getresponse()
            self._send_upstream_response(req, resp)
        finally:
            conn.close()

    def _send_upstream_response(self, req: ProxyRequest, resp):
        limit = self.cfg.max_body_bytes
        body = b"" if req.method == "HEAD" else resp.read(limit + 1)
        headers = [(n, v) for n, v in resp.getheaders() if n.lower() not in HOP_BY_HOP]

        if len(body) > limit:
            self.engine.note("oversized_bodies")
            logger.warning("body over %d bytes for %s; passing through unrewritten", limit, req.url)
            self._stream_through(resp, body, headers)
            return

        ctype, charset = _split_content_type(resp.getheader("Content-Type") or "")
        out = body
        if req.method != "HEAD" and (ctype in HTML_TYPES or ctype in CSS_TYPES):
            out = self._analyze(req, resp, body, ctype, charset, headers)
            if out is None:  # decompression failed; serve original untouched
                out = body
        else:
            self.engine.note_passthrough()

        # HEAD mirrors the headers a GET would produce; everything else gets
        # its Content-Length recomputed for the (possibly rewritten) body.
        recompute_length = req.method != "HEAD"
        self.send_response(resp.status, resp.reason)
        sent_length = False
        for name, value in headers:
            lname = name.lower()
            if lname == "content-length":
                if recompute_length:
                    value = str(len(out))
                sent_length = True
            self.send_header(name, value)
        if not sent_length and recompute_length:
            self.send_header("Content-Length", str(len(out)))
        self.send_header("Connection", "close")
        self.end_headers()
        if req.method != "HEAD":
            self.wfile.write(out)
        self.close_connection = True

    def _analyze(self, req, resp, body, ctype, charset, headers) -> bytes | None:
        """Run extraction (and HTML rewriting) on a decodable body.

        Returns replacement bytes, or None when the body could not be
        decompressed (pass-through contract).
        """
        encoding = resp.getheader("Content-Encoding") or ""
        try:
            payload = _decompress(body, encoding)
        except Exception as exc:
            self.engine.note("decompress_failures")
            logger.warning("cannot decompress %s response from %s: %s", encoding, req.url, exc)
            return None
        text, codec = _decode_body(payload, charset)

        if ctype in CSS_TYPES:
            self.engine.process_css(req, text)
            self.engine.note_passthrough()
            return body  # stylesheet bytes flow through unmodified

        rewritten = self.engine.process_html(req, text)
        out = rewritten.encode(codec)
        # Rewritten documents are served uncompressed.
        headers[:] = [(n, v) for n, v in headers if n.lower() != "content-encoding"]
        return out

    def _stream_through(self, resp, first: bytes, headers):
        """Oversized body: forward bytes as they come, close-delimited."""
        self.send_response(resp.status, resp.reason)
        for name, value in headers:
            if name.lower() == "content-length":
                continue
            self.send_header(name, value)
        total = resp.length if resp.length is not None else None
        if total is not None:
            self.send_header("Content-Length", str(len(first) + (resp.length or 0)))
        self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(first)
        while True:
            chunk = resp.read(_TUNNEL_CHUNK)
            if not chunk:
                break
            self.wfile.write(chunk)
        self.close_connection = True

    # -- CONNECT tunneling -----------------------------------------------------

    def do_CONNECT(self):
        host, _, port = self.path.rpartition(":")
        try:
            target_port = int(port)
        except ValueError:
            self._send_simple(400, "malformed CONNECT target\n")
            return
        host, target_port = self.cfg.host_aliases.get(host, (host, target_port))
        try:
            upstream = socket.create_connection(
                (host, target_port), timeout=self.cfg.upstream_timeout_secs
            )
        except OSError as exc:
            self._send_simple(502, f"upstream connection failure: {exc}\n")
            return
        self.send_response(200, "Connection Established")
        self.end_headers()
        self._tunnel(self.connection, upstream)
        self.close_connection = True

    @staticmethod
    def _tunnel(client: socket.socket, upstream: socket.socket):
        with upstream:
            pairs = {client: upstream, upstream: client}
            while True:
                readable, _, errored = select.select(list(pairs), [], list(pairs), 60)
                if errored or not readable:
                    return
                for sock in readable:
                    try:
                        data = sock.recv(_TUNNEL_CHUNK)
                    except OSError:
                        return
                    if not data:
                        return
                    try:
                        pairs[sock].sendall(data)
                    except OSError:
                        return


class ProxyServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, engine: FilterEngine):
        self.engine = engine
        super().__init__(engine.config.listen, ProxyHandler)

    @property
    def bound_address(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]

    def serve_in_thread(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, name="linkfence-proxy", daemon=True)
        thread.start()
        return thread
