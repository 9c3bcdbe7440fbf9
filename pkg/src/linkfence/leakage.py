"""Exfiltration-capacity accounting for a page's static external links.

A page embedding n distinct external links gives an attacker a covert channel:
by choosing which r links to request (order matters, repeats add nothing) the
attacker can encode one of n!/(n-r)! distinguishable messages. The ledger
tracks r per page context and the gate denies any request whose prospective
capacity, in whole bits, would exceed the configured budget.

All capacity arithmetic is exact big-integer work; no floating point anywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .urls import AbsoluteUrl


def distinct_values(n: int, r: int) -> int:
    """Count of distinguishable messages encodable by r requests among n links.

    0 when r == 0 (no request carries no information), else the falling
    product n*(n-1)*...*(n-r+1) == n!/(n-r)!, computed exactly.
    """
    if not 0 <= r <= n:
        raise ValueError(f"need 0 <= r <= n, got n={n} r={r}")
    if r == 0:
        return 0
    total = 1
    for k in range(n, n - r, -1):
        total *= k
    return total


def leakage_bits(n: int, r: int) -> int:
    """Channel capacity in whole bits: floor(log2(distinct_values(n, r))).

    0 when the count is 0 or 1. Exact: floor(log2(i)) == i.bit_length() - 1
    for any positive integer i.
    """
    values = distinct_values(n, r)
    if values <= 1:
        return 0
    return values.bit_length() - 1


def max_requests_within(n: int, budget_bits: int) -> int:
    """Largest r with leakage_bits(n, r) <= budget_bits.

    Capacity is non-decreasing in r, so a forward scan terminates at the
    first r over budget.
    """
    if n < 0 or budget_bits < 0:
        raise ValueError(f"need n >= 0 and budget_bits >= 0, got n={n} budget={budget_bits}")
    allowed = 0
    for r in range(1, n + 1):
        if leakage_bits(n, r) > budget_bits:
            break
        allowed = r
    return allowed


def capacity_table(n: int) -> list[tuple[int, int, int]]:
    """(r, distinct values, bits) rows for r = 1..n."""
    return [(r, distinct_values(n, r), leakage_bits(n, r)) for r in range(1, n + 1)]


@dataclass
class ThresholdConfig:
    """Per-page leakage budget in bits."""

    max_bits: int = 50

    def __post_init__(self) -> None:
        if self.max_bits < 0:
            raise ValueError("max_bits must be >= 0")


@dataclass
class LeakageLedger:
    """Per-page-context record of followed static external links.

    n mirrors the owning inventory's external-link count; followed is the set
    of inventory links actually requested (r == len(followed)); bits is kept
    equal to leakage_bits(n, r) on every mutation.
    """

    context_id: str
    n: int = 0
    followed: set[AbsoluteUrl] = field(default_factory=set)
    bits: int = 0

    @property
    def r(self) -> int:
        return len(self.followed)

    def set_link_count(self, n: int) -> None:
        if n < self.r:
            raise ValueError(f"inventory shrank below followed count: n={n} r={self.r}")
        self.n = n
        self.bits = leakage_bits(self.n, self.r)


def record_and_check(ledger: LeakageLedger, link: AbsoluteUrl, cfg: ThresholdConfig) -> bool:
    """Meter one followed link against the budget; True = allow.

    A repeat of an already-followed link is allowed without change (it adds
    no new information). Otherwise the link is admitted only if the
    prospective capacity at r+1 stays within cfg.max_bits; on deny the
    ledger is untouched. Callers serialize per-ledger access (the engine's
    state lock makes the check-and-update atomic).
    """
    if link in ledger.followed:
        return True
    prospective = leakage_bits(ledger.n, ledger.r + 1)
    if prospective > cfg.max_bits:
        return False
    ledger.followed.add(link)
    ledger.bits = prospective
    return True
