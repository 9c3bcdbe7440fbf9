"""Runtime configuration shared by the proxy, engine, and management API."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path


def parse_hostport(value: str, default_host: str = "127.0.0.1") -> tuple[str, int]:
    """"host:port" or bare ":port"/"port" -> (host, port)."""
    if ":" in value:
        host, _, port = value.rpartition(":")
        return (host or default_host, int(port))
    return (default_host, int(value))


@dataclass
class ProxyConfig:
    listen: tuple[str, int] = ("127.0.0.1", 8118)
    mgmt_listen: tuple[str, int] = ("127.0.0.1", 8119)
    threshold_bits: int = 50
    rules_file: Path | None = None
    alert_timeout_secs: float = 30.0
    inject_enabled: bool = True
    max_body_bytes: int = 8 * 1024 * 1024
    log_level: str = "INFO"
    # Accept: text/html + GET with a Referer counts as a navigation when on.
    # Off by default: it would also wave through script-driven cross-site
    # navigations, the very channel the filter exists to gate.
    nav_heuristic: bool = False
    # Matching permanent deny rules beat temporary auto-allows when on.
    permanent_deny_overrides: bool = False
    alert_queue_capacity: int = 256
    max_contexts: int = 512
    upstream_timeout_secs: float = 30.0
    # Upstream host -> (address, port) overrides, for lab setups where the
    # requested hostnames are not in DNS.
    host_aliases: dict[str, tuple[str, int]] = field(default_factory=dict)
    # Directory of static console assets served at /console (optional).
    console_dir: Path | None = None
