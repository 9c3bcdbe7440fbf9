"""Allow/deny filter rules: temporary (context-scoped) and permanent stores.

Temporary rules are auto-derived from a page's static links (or scoped user
decisions) and die with their page context. Permanent rules persist in a
JSON-lines file, rewritten atomically on every change. Matching checks the
temporary tier first, then permanent; within a tier the most specific pattern
wins (exact > prefix > domain), ties broken by earliest creation.
"""
from __future__ import annotations

import json
import os
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .domains import registrable_domain
from .urls import AbsoluteUrl

ALLOW = "allow"
DENY = "deny"

KIND_EXACT = "exact"
KIND_PREFIX = "prefix"
KIND_DOMAIN = "domain"

_SPECIFICITY = {KIND_EXACT: 0, KIND_PREFIX: 1, KIND_DOMAIN: 2}

ORIGIN_AUTO = "auto-extracted"
ORIGIN_USER = "user-decision"

LIFETIME_TEMPORARY = "temporary"
LIFETIME_PERMANENT = "permanent"


@dataclass(frozen=True)
class RulePattern:
    kind: str  # exact | prefix | domain
    value: str  # canonical URL, URL prefix, or registrable domain

    def matches(self, url: AbsoluteUrl) -> bool:
        if self.kind == KIND_EXACT:
            return url.canonical == self.value
        if self.kind == KIND_PREFIX:
            return url.canonical.startswith(self.value)
        if self.kind == KIND_DOMAIN:
            return registrable_domain(url.host) == self.value
        return False


@dataclass
class FilterRule:
    id: str
    pattern: RulePattern
    action: str  # allow | deny
    lifetime: str  # temporary | permanent
    context_id: str | None  # owner, set iff temporary
    origin: str  # auto-extracted | user-decision
    created_at: datetime

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "pattern": {"kind": self.pattern.kind, "value": self.pattern.value},
            "action": self.action,
            "lifetime": self.lifetime,
            "context_id": self.context_id,
            "origin": self.origin,
            "created_at": self.created_at.isoformat(),
        }


def _best(rules: list[FilterRule], url: AbsoluteUrl) -> FilterRule | None:
    hits = [r for r in rules if r.pattern.matches(url)]
    if not hits:
        return None
    hits.sort(key=lambda r: (_SPECIFICITY[r.pattern.kind], r.created_at, r.id))
    return hits[0]


class RuleStore:
    """Both rule tiers plus the permanent-rules file.

    Mutations and reads are serialized by the engine's state lock; the store
    itself only guards its file writes.
    """

    def __init__(self, rules_file: Path | None = None):
        self._seq = 0
        self._file_lock = threading.Lock()
        self.rules_file = Path(rules_file) if rules_file else None
        self.permanent: dict[str, FilterRule] = {}
        # context_id -> pattern key -> rule; pattern-keying makes
        # register_temporary_rules idempotent per context.
        self.temporary: dict[str, dict[tuple[str, str], FilterRule]] = {}
        if self.rules_file and self.rules_file.exists():
            self._load()

    def _next_id(self, prefix: str) -> str:
        self._seq += 1
        return f"{prefix}{self._seq:06d}"

    # -- creation / removal -------------------------------------------------

    def add_temporary(
        self,
        context_id: str,
        pattern: RulePattern,
        action: str,
        origin: str = ORIGIN_AUTO,
    ) -> FilterRule:
        bucket = self.temporary.setdefault(context_id, {})
        key = (pattern.kind, pattern.value)
        existing = bucket.get(key)
        if existing is not None and existing.action == action:
            return existing
        rule = FilterRule(
            id=self._next_id("t"),
            pattern=pattern,
            action=action,
            lifetime=LIFETIME_TEMPORARY,
            context_id=context_id,
            origin=origin,
            created_at=datetime.now(timezone.utc),
        )
        bucket[key] = rule
        return rule

    def add_permanent(
        self,
        pattern: RulePattern,
        action: str,
        origin: str = ORIGIN_USER,
        created_at: datetime | None = None,
        persist: bool = True,
    ) -> FilterRule:
        rule = FilterRule(
            id=self._next_id("p"),
            pattern=pattern,
            action=action,
            lifetime=LIFETIME_PERMANENT,
            context_id=None,
            origin=origin,
            created_at=created_at or datetime.now(timezone.utc),
        )
        self.permanent[rule.id] = rule
        if persist:
            self.save()
        return rule

    def drop_context(self, context_id: str) -> int:
        """Remove all (and only) the context's temporary rules."""
        return len(self.temporary.pop(context_id, {}))

    def remove(self, rule_id: str) -> bool:
        if rule_id in self.permanent:
            del self.permanent[rule_id]
            self.save()
            return True
        for bucket in self.temporary.values():
            for key, rule in list(bucket.items()):
                if rule.id == rule_id:
                    del bucket[key]
                    return True
        return False

    # -- lookup ---------------------------------------------------------------

    def match(
        self,
        url: AbsoluteUrl,
        context_id: str | None,
        permanent_deny_overrides: bool = False,
    ) -> FilterRule | None:
        """Winning rule for a URL: temporary tier of the context first, then
        permanent. permanent_deny_overrides flips a matching permanent deny
        ahead of any temporary rule."""
        perm = _best(list(self.permanent.values()), url)
        if permanent_deny_overrides and perm is not None and perm.action == DENY:
            return perm
        if context_id is not None:
            temp = _best(list(self.temporary.get(context_id, {}).values()), url)
            if temp is not None:
                return temp
        return perm

    def temporary_count(self, context_id: str, origin: str | None = None) -> int:
        bucket = self.temporary.get(context_id, {})
        if origin is None:
            return len(bucket)
        return sum(1 for r in bucket.values() if r.origin == origin)

    def all_rules(self) -> list[FilterRule]:
        out = list(self.permanent.values())
        for bucket in self.temporary.values():
            out.extend(bucket.values())
        out.sort(key=lambda r: (r.created_at, r.id))
        return out

    # -- persistence ---------------------------------------------------------

    def _load(self) -> None:
        for line in self.rules_file.read_text("utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            self.add_permanent(
                pattern=RulePattern(obj["pattern"]["kind"], obj["pattern"]["value"]),
                action=obj["action"],
                created_at=datetime.fromisoformat(obj["created_at"]),
                persist=False,
            )

    def save(self) -> None:
        """Rewrite the permanent-rules file atomically (temp file + rename)."""
        if self.rules_file is None:
            return
        lines = [
            json.dumps(
                {
                    "pattern": {"kind": r.pattern.kind, "value": r.pattern.value},
                    "action": r.action,
                    "created_at": r.created_at.isoformat(),
                }
            )
            for r in sorted(self.permanent.values(), key=lambda r: (r.created_at, r.id))
        ]
        with self._file_lock:
            self.rules_file.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=self.rules_file.parent, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write("\n".join(lines) + ("\n" if lines else ""))
                os.replace(tmp, self.rules_file)
            except BaseException:
                try:
                    os.unlink(tmp)
                except OSError:
                    pass
                raise


def register_temporary_rules(inventory, context, store: RuleStore) -> int:
    """One temporary exact-URL allow rule per external link; idempotent.

    Returns the inventory's external-link count (== the number of auto rules
    the context now holds for it).
    """
    for link in inventory.external_links:
        store.add_temporary(
            context.context_id,
            RulePattern(KIND_EXACT, link.canonical),
            ALLOW,
            origin=ORIGIN_AUTO,
        )
    return inventory.n
