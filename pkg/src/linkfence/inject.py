"""Defensive script injection into proxied HTML pages.

The guard script (data/guard.js) runs before any page script: it clears
window.name in pop-ups opened cross-origin (the classic cookie smuggling
channel) and sanitizes query-string frame targets. The payload lands
immediately after the first head-open tag; documents without a head get it
before body, and bare fragments get it prepended. A marker attribute makes
injection idempotent.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

MARKER = "data-linkfence-guard"

_HEAD_OPEN = re.compile(r"<head\b[^>]*>", re.IGNORECASE)
_BODY_OPEN = re.compile(r"<body\b[^>]*>", re.IGNORECASE)


@dataclass(frozen=True)
class InjectionPayload:
    marker: str
    source: str

    @property
    def element(self) -> str:
        return f'<script type="text/javascript" {self.marker}="1">\n{self.source}</script>'


@lru_cache(maxsize=1)
def build_payload() -> InjectionPayload:
    """The self-contained guard payload; marker appears exactly once."""
    source = (resources.files("linkfence") / "data" / "guard.js").read_text("utf-8")
    payload = InjectionPayload(marker=MARKER, source=source)
    assert payload.element.count(MARKER) == 1
    return payload


def inject(document: str) -> str:
    """Insert the guard payload into an HTML document, exactly once.

    Pure string insertion: output is the input with the payload element
    spliced in after the head-open tag (fallbacks: before body-open, else
    document start). Already-marked documents pass through unchanged.
    """
    payload = build_payload()
    if payload.marker in document:
        return document
    element = payload.element
    match = _HEAD_OPEN.search(document)
    if match:
        at = match.end()
    else:
        match = _BODY_OPEN.search(document)
        at = match.start() if match else 0
    return document[:at] + element + document[at:]
