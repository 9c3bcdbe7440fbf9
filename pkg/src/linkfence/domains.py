"""Registrable-domain extraction and local/external classification.

Two hosts are "local" to each other when they share a registrable domain:
client1.example.com and www.example.com both map to example.com. A snapshot
public-suffix table (data/public_suffixes.dat) handles multi-label suffixes
such as co.uk; anything not in the table falls back to the last two labels.
"""
from __future__ import annotations

import ipaddress
from functools import lru_cache
from importlib import resources

from .urls import AbsoluteUrl

_SUFFIX_FILE = "public_suffixes.dat"


@lru_cache(maxsize=1)
def _suffix_table() -> frozenset[str]:
    text = (resources.files("linkfence") / "data" / _SUFFIX_FILE).read_text("utf-8")
    entries = set()
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            entries.add(line)
    return frozenset(entries)


def _is_ip_literal(host: str) -> bool:
    try:
        ipaddress.ip_address(host)
        return True
    except ValueError:
        return False


def registrable_domain(host: str) -> str:
    """Registrable domain (public suffix + one label) of a DNS name.

    IP literals and single-label hosts are their own key. Idempotent:
    registrable_domain(registrable_domain(h)) == registrable_domain(h).
    """
    host = host.strip().rstrip(".").lower()
    if not host or _is_ip_literal(host):
        return host
    labels = host.split(".")
    if len(labels) == 1:
        return host
    table = _suffix_table()
    suffix_len = 1  # bare TLD unless the table knows a longer suffix
    for i in range(len(labels) - 1):
        if ".".join(labels[i:]) in table:
            suffix_len = len(labels) - i
            break
    take = min(len(labels), suffix_len + 1)
    return ".".join(labels[-take:])


def is_local(request_url: AbsoluteUrl, referrer: AbsoluteUrl) -> bool:
    """True iff both URLs live in the same registrable domain."""
    return registrable_domain(request_url.host) == registrable_domain(referrer.host)
