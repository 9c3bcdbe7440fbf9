"""Static link extraction from HTML documents and CSS text.

Collects every distinct resolvable URL found in an href or src attribute of
any element, plus url(...) operands inside <style> blocks and style
attributes, and classifies each as local or external against the owning
page's registrable domain. frame/iframe src values are additionally marked:
their documents get analyzed when the browser fetches them through the proxy.

Parsing is tolerant and non-validating (html.parser); a malformed attribute
or token is counted and skipped, never fatal. Links inside HTML comments and
URLs appearing in plain text or script bodies contribute nothing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from html.parser import HTMLParser

from .domains import is_local
from .urls import SCRIPT_SCHEMES, AbsoluteUrl, link_scheme, resolve_link

LINK_ATTRS = ("href", "src")
FRAME_TAGS = frozenset({"frame", "iframe"})

_CSS_URL_TOKEN = re.compile(
    r"""url\(\s*(?:"(?P<dq>[^"]*)"|'(?P<sq>[^']*)'|(?P<bare>[^)'"\s][^)]*?))\s*\)""",
    re.IGNORECASE,
)


@dataclass
class ExtractionStats:
    """Counters for what extraction saw and skipped; exposed via the API."""

    documents: int = 0
    stylesheets: int = 0
    links_external: int = 0
    links_local: int = 0
    skipped_unparseable: int = 0
    script_scheme_links: int = 0

    def merge(self, other: ExtractionStats) -> None:
        self.documents += other.documents
        self.stylesheets += other.stylesheets
        self.links_external += other.links_external
        self.links_local += other.links_local
        self.skipped_unparseable += other.skipped_unparseable
        self.script_scheme_links += other.script_scheme_links

    def as_dict(self) -> dict[str, int]:
        return {
            "documents": self.documents,
            "stylesheets": self.stylesheets,
            "links_external": self.links_external,
            "links_local": self.links_local,
            "skipped_unparseable": self.skipped_unparseable,
            "script_scheme_links": self.script_scheme_links,
        }


@dataclass
class LinkInventory:
    """Distinct statically embedded links of one page, split local/external.

    n (the external count) feeds the leakage ledger; frame_links records
    which entries arrived via frame/iframe src and are pending recursive
    analysis.
    """

    page_url: AbsoluteUrl
    external_links: set[AbsoluteUrl] = field(default_factory=set)
    local_links: set[AbsoluteUrl] = field(default_factory=set)
    frame_links: set[AbsoluteUrl] = field(default_factory=set)

    @property
    def n(self) -> int:
        return len(self.external_links)

    def add(self, link: AbsoluteUrl, frame: bool = False) -> None:
        if is_local(link, self.page_url):
            self.local_links.add(link)
        else:
            self.external_links.add(link)
        if frame:
            self.frame_links.add(link)

    def merge(self, other: LinkInventory) -> None:
        """Fold another document's links in (frame content, CSS finds)."""
        for link in other.external_links | other.local_links:
            self.add(link, frame=link in other.frame_links)


class _LinkParser(HTMLParser):
    """Tag-agnostic href/src scan plus style-sheet text capture."""

    def __init__(self, base: AbsoluteUrl, inventory: LinkInventory, stats: ExtractionStats):
        super().__init__(convert_charrefs=True)
        self.base = base
        self.inventory = inventory
        self.stats = stats
        self._style_depth = 0

    def _take(self, raw: str, frame: bool) -> None:
        if link_scheme(raw) in SCRIPT_SCHEMES:
            self.stats.script_scheme_links += 1
            return
        link = resolve_link(self.base, raw)
        if link is None:
            self.stats.skipped_unparseable += 1
            return
        self.inventory.add(link, frame=frame)
        if is_local(link, self.inventory.page_url):
            self.stats.links_local += 1
        else:
            self.stats.links_external += 1

    def _scan_attrs(self, tag: str, attrs: list[tuple[str, str | None]]) -> None:
        for name, value in attrs:
            if value is None:
                continue
            lname = name.lower()
            if lname in LINK_ATTRS:
                self._take(value, frame=tag in FRAME_TAGS and lname == "src")
            elif lname == "style":
                for raw in css_url_tokens(value):
                    self._take(raw, frame=False)

    def handle_starttag(self, tag, attrs):
        self._scan_attrs(tag, attrs)
        if tag == "style":
            self._style_depth += 1

    def handle_startendtag(self, tag, attrs):
        self._scan_attrs(tag, attrs)

    def handle_endtag(self, tag):
        if tag == "style" and self._style_depth:
            self._style_depth -= 1

    def handle_data(self, data):
        if self._style_depth:
            for raw in css_url_tokens(data):
                self._take(raw, frame=False)


def css_url_tokens(css: str) -> list[str]:
    """Raw operands of url(...) tokens, unquoted and trimmed."""
    out = []
    for match in _CSS_URL_TOKEN.finditer(css):
        raw = match.group("dq") or match.group("sq") or match.group("bare") or ""
        raw = raw.strip()
        if raw:
            out.append(raw)
    return out


def extract_static_links(
    document: str | bytes,
    base: AbsoluteUrl,
    stats: ExtractionStats | None = None,
) -> LinkInventory:
    """Build the page's link inventory from its HTML source.

    Bytes input gets a Latin-1 byte-preserving decode; callers that know the
    response charset should decode first.
    """
    if isinstance(document, bytes):
        document = document.decode("latin-1")
    stats = stats if stats is not None else ExtractionStats()
    stats.documents += 1
    inventory = LinkInventory(page_url=base)
    parser = _LinkParser(base, inventory, stats)
    try:
        parser.feed(document)
        parser.close()
    except Exception:
        # Tolerant contract: keep whatever was extracted before the choke.
        stats.skipped_unparseable += 1
    return inventory


def extract_css_urls(
    css: str,
    base: AbsoluteUrl,
    stats: ExtractionStats | None = None,
) -> set[AbsoluteUrl]:
    """Every url(...) operand in a stylesheet, resolved against base."""
    stats = stats if stats is not None else ExtractionStats()
    stats.stylesheets += 1
    found: set[AbsoluteUrl] = set()
    for raw in css_url_tokens(css):
        if link_scheme(raw) in SCRIPT_SCHEMES:
            stats.script_scheme_links += 1
            continue
        link = resolve_link(base, raw)
        if link is None:
            stats.skipped_unparseable += 1
            continue
        found.add(link)
    return found
