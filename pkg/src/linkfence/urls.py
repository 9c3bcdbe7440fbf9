"""Absolute URL parsing, normalization, and relative-reference resolution.

Every local/external decision in the proxy runs on normalized URLs: lowercase
host, scheme-default ports dropped from the canonical form, fragments stripped,
empty paths rewritten to "/".
"""
from __future__ import annotations

from dataclasses import dataclass
from urllib.parse import urljoin, urlsplit

DEFAULT_PORTS = {"http": 80, "https": 443}

# Schemes that carry executable or non-network payloads; never resolvable links.
SCRIPT_SCHEMES = frozenset({"javascript", "data", "mailto", "about"})


@dataclass(frozen=True, slots=True)
class AbsoluteUrl:
    """A parsed http(s) URL. Hashable; equality is normalized-form equality."""

    scheme: str
    host: str
    port: int
    path: str
    query: str | None = None

    @property
    def canonical(self) -> str:
        host = f"[{self.host}]" if ":" in self.host else self.host
        port = "" if self.port == DEFAULT_PORTS[self.scheme] else f":{self.port}"
        query = f"?{self.query}" if self.query is not None else ""
        return f"{self.scheme}://{host}{port}{self.path}{query}"

    @property
    def origin(self) -> str:
        host = f"[{self.host}]" if ":" in self.host else self.host
        port = "" if self.port == DEFAULT_PORTS[self.scheme] else f":{self.port}"
        return f"{self.scheme}://{host}{port}"

    def __str__(self) -> str:
        return self.canonical


def parse_absolute(raw: str) -> AbsoluteUrl | None:
    """Parse an absolute http(s) URL; None for anything else.

    Userinfo and fragments are dropped; host is lowercased; an explicit
    scheme-default port is normalized away; an empty path becomes "/".
    """
    try:
        parts = urlsplit(raw)
        scheme = parts.scheme.lower()
        if scheme not in DEFAULT_PORTS:
            return None
        host = parts.hostname
        if not host:
            return None
        port = parts.port  # raises ValueError on junk ports
    except ValueError:
        return None
    return AbsoluteUrl(
        scheme=scheme,
        host=host,
        port=port if port is not None else DEFAULT_PORTS[scheme],
        path=parts.path or "/",
        query=parts.query or None,
    )


def link_scheme(raw: str) -> str:
    """Scheme token of a raw link value, lowercased; "" when relative."""
    try:
        return urlsplit(raw.strip()).scheme.lower()
    except ValueError:
        return ""


def resolve_link(base: AbsoluteUrl, raw: str) -> AbsoluteUrl | None:
    """Resolve a raw attribute value against a base document URL.

    Standard relative-reference resolution. Returns None for script-bearing
    schemes (javascript:, data:, mailto:, about:) and for anything that does
    not resolve to an absolute http(s) URL.
    """
    raw = raw.strip()
    if not raw:
        return None
    if link_scheme(raw) in SCRIPT_SCHEMES:
        return None
    try:
        joined = urljoin(base.canonical, raw)
    except ValueError:
        return None
    return parse_absolute(joined)
