#!/usr/bin/env python3
"""Self-contained demo: a page carrying eight cross-domain images is replayed
through the proxy with an 11-bit leakage budget.

Spins up a canned origin server and the proxy on ephemeral loopback ports
(hostnames resolved via --alias-style overrides), fetches the page the way a
browser would, then requests each image and prints the proxy's verdicts.
"""
from __future__ import annotations

import threading
from http.client import HTTPConnection
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from linkfence.config import ProxyConfig
from linkfence.engine import FilterEngine
from linkfence.proxy import ProxyServer

PAGE_HOST = "demo.site.local"
IMAGE_HOSTS = [f"evil{i}.com" for i in range(1, 9)]
PAGE = "<html><head><title>demo</title></head><body>" + "".join(
    f'<img src="http://{h}/pic.jpg">' for h in IMAGE_HOSTS
) + "</body></html>"


class Origin(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def do_GET(self):
        if self.path == "/":
            body, ctype = PAGE.encode(), "text/html; charset=utf-8"
        else:
            body, ctype = b"\xff\xd8demo-jpeg", "image/jpeg"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Connection", "close")
        self.end_headers()
        self.wfile.write(body)


def proxied_get(proxy_addr, url, referer=None):
    conn = HTTPConnection(*proxy_addr, timeout=10)
    try:
        conn.putrequest("GET", url, skip_host=True, skip_accept_encoding=True)
        conn.putheader("Host", url.split("/")[2])
        if referer:
            conn.putheader("Referer", referer)
        conn.endheaders()
        resp = conn.getresponse()
        body = resp.read()
        return resp.status, dict(resp.getheaders()), body
    finally:
        conn.close()


def main() -> int:
    origin = ThreadingHTTPServer(("127.0.0.1", 0), Origin)
    origin.daemon_threads = True
    threading.Thread(target=origin.serve_forever, daemon=True).start()
    origin_addr = ("127.0.0.1", origin.server_address[1])

    config = ProxyConfig(
        listen=("127.0.0.1", 0),
        threshold_bits=11,
        host_aliases={h: origin_addr for h in [PAGE_HOST, *IMAGE_HOSTS]},
    )
    engine = FilterEngine(config)
    proxy = ProxyServer(engine)
    proxy.serve_in_thread()
    addr = proxy.bound_address

    print(f"proxy on {addr[0]}:{addr[1]}, leakage budget {config.threshold_bits} bits\n")
    status, _, body = proxied_get(addr, f"http://{PAGE_HOST}/")
    snapshot = engine.contexts_snapshot()[0]
    print(f"page fetch -> {status}, inventory n={snapshot['n']}, "
          f"guard injected: {'data-linkfence-guard' in body.decode()}\n")

    for host in IMAGE_HOSTS:
        status, headers, _ = proxied_get(addr, f"http://{host}/pic.jpg", referer=f"http://{PAGE_HOST}/")
        snap = engine.contexts_snapshot()[0]
        verdict = "forwarded" if status == 200 else f"denied ({headers.get('X-Filter-Reason')})"
        print(f"GET http://{host}/pic.jpg -> {status} {verdict:32s} "
              f"r={snap['r']} bits={snap['bits']}/{snap['threshold']}")

    proxy.shutdown()
    origin.shutdown()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
