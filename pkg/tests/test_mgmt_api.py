"""Management API surface: alerts, rules CRUD, contexts, config, stats."""
from __future__ import annotations

import json
import threading
import time

SITE_PAGE = (
    "<html><head><title>site</title></head><body>"
    + "".join(f'<img src="http://evil{i}.local/p{i}.jpg">' for i in range(1, 9))
    + "</body></html>"
)


def seeded(backend, make_proxy, **cfg):
    backend.add("/", SITE_PAGE)
    for i in range(1, 9):
        backend.add(f"/p{i}.jpg", b"GIF89a", content_type="image/gif")
    hosts = ["www.site.local", "evil.local"] + [f"evil{i}.local" for i in range(1, 9)]
    put = make_proxy({h: backend.address for h in hosts}, with_mgmt=True, **cfg)
    return put


def test_schema_version_everywhere(backend, make_proxy):
    put = seeded(backend, make_proxy)
    for path in ("/api/alerts", "/api/rules", "/api/contexts", "/api/config", "/api/stats"):
        status, doc = put.mgmt_request("GET", path)
        assert status == 200
        assert doc["schema_version"] == 1


def test_contexts_snapshot_after_page_fetch(backend, make_proxy):
    put = seeded(backend, make_proxy, threshold_bits=11)
    put.get("http://www.site.local/")
    status, doc = put.mgmt_request("GET", "/api/contexts")
    assert status == 200
    (ctx,) = doc["contexts"]
    assert ctx["page_url"] == "http://www.site.local/"
    assert ctx["n"] == 8 and ctx["r"] == 0 and ctx["bits"] == 0
    assert ctx["threshold"] == 11

    for i in range(1, 5):
        put.get(f"http://evil{i}.local/p{i}.jpg", referer="http://www.site.local/")
    _, doc = put.mgmt_request("GET", "/api/contexts")
    (ctx,) = doc["contexts"]
    assert (ctx["n"], ctx["r"], ctx["bits"]) == (8, 4, 10)


def test_alert_lifecycle_allow_permanent(backend, make_proxy, tmp_path):
    rules_file = tmp_path / "rules.jsonl"
    put = seeded(backend, make_proxy, alert_timeout_secs=5.0, rules_file=rules_file)
    backend.add("/wanted.js", b"res", content_type="application/javascript")
    put.get("http://www.site.local/")

    result = {}

    def fetch():
        result["resp"] = put.get("http://evil.local/wanted.js", referer="http://www.site.local/")

    thread = threading.Thread(target=fetch)
    thread.start()

    status, doc = put.mgmt_request("GET", "/api/alerts?wait=1")
    assert status == 200 and len(doc["alerts"]) == 1
    ticket = doc["alerts"][0]
    assert ticket["state"] == "pending"
    assert ticket["request_url"] == "http://evil.local/wanted.js"
    assert ticket["referrer"] == "http://www.site.local/"

    status, doc = put.mgmt_request(
        "POST", f"/api/alerts/{ticket['id']}/decision",
        {"action": "allow", "scope": "permanent"},
    )
    assert status == 200
    assert doc["ticket"]["state"] == "decided"
    thread.join(timeout=5)
    assert result["resp"][0] == 200

    # decided ticket no longer pending
    _, doc = put.mgmt_request("GET", "/api/alerts")
    assert doc["alerts"] == []

    # the permanent rule landed in the rules file
    lines = [json.loads(l) for l in rules_file.read_text().splitlines()]
    assert lines == [
        {
            "pattern": {"kind": "domain", "value": "evil.local"},
            "action": "allow",
            "created_at": lines[0]["created_at"],
        }
    ]


def test_alert_double_decision_conflict(backend, make_proxy):
    put = seeded(backend, make_proxy, alert_timeout_secs=5.0)
    put.get("http://www.site.local/")

    threading.Thread(
        target=lambda: put.get("http://evil.local/x", referer="http://www.site.local/"),
        daemon=True,
    ).start()
    _, doc = put.mgmt_request("GET", "/api/alerts?wait=1")
    ticket_id = doc["alerts"][0]["id"]
    first, _ = put.mgmt_request(
        "POST", f"/api/alerts/{ticket_id}/decision", {"action": "deny", "scope": "temporary"}
    )
    second, doc = put.mgmt_request(
        "POST", f"/api/alerts/{ticket_id}/decision", {"action": "allow", "scope": "permanent"}
    )
    assert first == 200
    assert second == 409
    assert "error" in doc


def test_alert_unknown_ticket_404(backend, make_proxy):
    put = seeded(backend, make_proxy)
    status, _ = put.mgmt_request(
        "POST", "/api/alerts/zzz/decision", {"action": "deny", "scope": "temporary"}
    )
    assert status == 404


def test_alert_bad_body_400(backend, make_proxy):
    put = seeded(backend, make_proxy)
    status, _ = put.mgmt_request("POST", "/api/alerts/zzz/decision", {"action": "maybe"})
    assert status == 400


def test_rules_crud(backend, make_proxy, tmp_path):
    put = seeded(backend, make_proxy, rules_file=tmp_path / "rules.jsonl")
    status, doc = put.mgmt_request(
        "POST", "/api/rules",
        {"pattern": {"kind": "domain", "value": "ads.example"}, "action": "deny"},
    )
    assert status == 201
    rule_id = doc["rule"]["id"]

    _, doc = put.mgmt_request("GET", "/api/rules")
    assert any(r["id"] == rule_id for r in doc["rules"])

    # the rule actually filters traffic
    put.get("http://www.site.local/")
    status, headers, _ = put.get("http://ads.example/b.js", referer="http://www.site.local/")
    assert status == 403 and headers["x-filter-reason"] == "permanent-deny"

    status, _ = put.mgmt_request("DELETE", f"/api/rules/{rule_id}")
    assert status == 200
    status, _ = put.mgmt_request("DELETE", f"/api/rules/{rule_id}")
    assert status == 404


def test_config_get_and_patch(backend, make_proxy):
    put = seeded(backend, make_proxy, threshold_bits=50)
    status, doc = put.mgmt_request("GET", "/api/config")
    assert doc["config"]["threshold_bits"] == 50
    status, doc = put.mgmt_request("PATCH", "/api/config", {"threshold_bits": 11})
    assert status == 200 and doc["config"]["threshold_bits"] == 11
    assert put.engine.threshold.max_bits == 11
    status, _ = put.mgmt_request("PATCH", "/api/config", {"threshold_bits": -3})
    assert status == 400


def test_stats_counts(backend, make_proxy):
    put = seeded(backend, make_proxy)
    put.get("http://www.site.local/")
    put.get("http://evil1.local/p1.jpg", referer="http://www.site.local/")
    _, doc = put.mgmt_request("GET", "/api/stats")
    stats = doc["stats"]
    assert stats["extraction"]["documents"] == 1
    assert stats["extraction"]["links_external"] == 8
    assert stats["counters"]["requests"] == 2
    assert stats["counters"]["forwarded"] == 2


def test_long_poll_returns_quickly_when_alert_arrives(backend, make_proxy):
    put = seeded(backend, make_proxy, alert_timeout_secs=5.0)
    put.get("http://www.site.local/")

    def later():
        time.sleep(0.2)
        put.get("http://evil.local/surprise", referer="http://www.site.local/")

    threading.Thread(target=later, daemon=True).start()
    started = time.monotonic()
    _, doc = put.mgmt_request("GET", "/api/alerts?wait=1")
    elapsed = time.monotonic() - started
    assert doc["alerts"] and elapsed < 5.0


def test_unknown_endpoint_404(backend, make_proxy):
    put = seeded(backend, make_proxy)
    status, _ = put.mgmt_request("GET", "/api/nothing")
    assert status == 404


def test_console_unconfigured_404(backend, make_proxy):
    put = seeded(backend, make_proxy)
    status, _ = put.mgmt_request("GET", "/console")
    assert status == 404


def test_console_serves_static_dir(backend, make_proxy, tmp_path):
    console = tmp_path / "console"
    console.mkdir()
    (console / "index.html").write_text("<html><body>console</body></html>")
    (console / "app.js").write_text("console.log('hi')")
    put = seeded(backend, make_proxy)
    put.engine.config.console_dir = console
    status, body = put.mgmt_request("GET", "/console")
    assert status == 200 and b"console" in body
    status, body = put.mgmt_request("GET", "/console/app.js")
    assert status == 200
    status, _ = put.mgmt_request("GET", "/console/../secret")
    assert status == 404
