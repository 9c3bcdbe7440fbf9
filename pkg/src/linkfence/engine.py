"""Filtering engine: page contexts, the decision pipeline, response rewriting.

One engine instance holds all shared filter state (contexts, rules, ledgers,
alert queue) behind a single lock; a request's read-decide-update step runs
atomically under it. Requests held for an operator decision wait on their
ticket's event, never on the lock, so prompts stall nothing else.

Decision pipeline, in order: requests without a referrer are top-level
navigations and pass (establishing a fresh context); same-registrable-domain
requests pass; a matching temporary rule applies next (static external links
are additionally metered by the leakage gate); then permanent rules; anything
left prompts the operator.
"""
from __future__ import annotations

import logging
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .alerts import SCOPE_PERMANENT, SCOPE_TEMPORARY, AlertQueue, AlertTicket
from .config import ProxyConfig
from .domains import is_local, registrable_domain
from .extract import (
    ExtractionStats,
    LinkInventory,
    extract_css_urls,
    extract_static_links,
)
from .inject import inject
from .leakage import LeakageLedger, ThresholdConfig, record_and_check
from .rules import (
    ALLOW,
    KIND_DOMAIN,
    KIND_EXACT,
    LIFETIME_TEMPORARY,
    ORIGIN_USER,
    RulePattern,
    RuleStore,
    register_temporary_rules,
)
from .urls import AbsoluteUrl

logger = logging.getLogger(__name__)

FORWARD = "forward"
DENY = "deny"
PROMPT = "prompt"

REASON_LOCAL_LINK = "local-link"
REASON_TEMPORARY_RULE = "temporary-rule"
REASON_PERMANENT_ALLOW = "permanent-allow"
REASON_PERMANENT_DENY = "permanent-deny"
REASON_LEAKAGE_THRESHOLD = "leakage-threshold"
REASON_NO_RULE = "no-rule"

HTML_TYPES = frozenset({"text/html", "application/xhtml+xml"})
CSS_TYPES = frozenset({"text/css"})


@dataclass(frozen=True)
class ProxyAction:
    kind: str  # forward | deny | prompt
    reason: str


@dataclass
class ProxyRequest:
    method: str
    url: AbsoluteUrl
    referrer: AbsoluteUrl | None = None
    headers: list[tuple[str, str]] = field(default_factory=list)
    body: bytes = b""

    def header(self, name: str) -> str | None:
        lname = name.lower()
        for key, value in self.headers:
            if key.lower() == lname:
                return value
        return None


@dataclass
class PageContext:
    context_id: str
    page_url: AbsoluteUrl
    inventory: LinkInventory
    ledger: LeakageLedger
    created_at: datetime

    def snapshot(self, threshold_bits: int) -> dict:
        return {
            "context_id": self.context_id,
            "page_url": self.page_url.canonical,
            "n": self.inventory.n,
            "r": self.ledger.r,
            "bits": self.ledger.bits,
            "threshold": threshold_bits,
        }


class FilterEngine:
    """Shared filter state plus every decision the proxy consults it for."""

    def __init__(self, config: ProxyConfig | None = None):
        self.config = config or ProxyConfig()
        self._lock = threading.RLock()
        self.contexts: dict[str, PageContext] = {}  # canonical page_url -> ctx
        self.store = RuleStore(self.config.rules_file)
        self.alerts = AlertQueue(capacity=self.config.alert_queue_capacity)
        self.threshold = ThresholdConfig(max_bits=self.config.threshold_bits)
        self.extraction_stats = ExtractionStats()
        self.counters = {
            "requests": 0,
            "forwarded": 0,
            "denied": 0,
            "prompted": 0,
            "responses_rewritten": 0,
            "responses_passthrough": 0,
            "decompress_failures": 0,
            "oversized_bodies": 0,
        }

    # -- contexts --------------------------------------------------------

    def _drop_key_locked(self, key: str) -> None:
        old = self.contexts.pop(key, None)
        # An alias key (same-domain subdocument) shares its parent's context;
        # the temporary rules die only with the last reference.
        if old is not None and not any(c is old for c in self.contexts.values()):
            self.store.drop_context(old.context_id)

    def _establish_locked(self, page_url: AbsoluteUrl) -> PageContext:
        key = page_url.canonical
        self._drop_key_locked(key)
        while len(self.contexts) >= self.config.max_contexts:
            evict_key = min(self.contexts, key=lambda k: self.contexts[k].created_at)
            self._drop_key_locked(evict_key)
        context_id = uuid.uuid4().hex[:12]
        ctx = PageContext(
            context_id=context_id,
            page_url=page_url,
            inventory=LinkInventory(page_url=page_url),
            ledger=LeakageLedger(context_id=context_id),
            created_at=datetime.now(timezone.utc),
        )
        self.contexts[key] = ctx
        return ctx

    def establish_page_context(self, page_url: AbsoluteUrl) -> PageContext:
        """Fresh context for a top-level navigation; replaces any prior
        context for the same page URL (ledger resets to r = 0)."""
        with self._lock:
            return self._establish_locked(page_url)

    def context_for(self, page_url: AbsoluteUrl) -> PageContext | None:
        with self._lock:
            return self.contexts.get(page_url.canonical)

    def _looks_like_navigation(self, req: ProxyRequest) -> bool:
        if not self.config.nav_heuristic or req.method.upper() != "GET":
            return False
        accept = req.header("Accept") or ""
        return accept.strip().lower().startswith("text/html")

    # -- decisions ---------------------------------------------------------

    def decide(self, req: ProxyRequest) -> tuple[ProxyAction, PageContext | None]:
        """The atomic read-decide-update step for one request."""
        with self._lock:
            self.counters["requests"] += 1
            if req.referrer is None or self._looks_like_navigation(req):
                ctx = self._establish_locked(req.url)
                return ProxyAction(FORWARD, REASON_LOCAL_LINK), ctx
            if is_local(req.url, req.referrer):
                return ProxyAction(FORWARD, REASON_LOCAL_LINK), self.contexts.get(
                    req.referrer.canonical
                )
            ctx = self.contexts.get(req.referrer.canonical)
            rule = self.store.match(
                req.url,
                ctx.context_id if ctx else None,
                permanent_deny_overrides=self.config.permanent_deny_overrides,
            )
            if rule is None:
                return ProxyAction(PROMPT, REASON_NO_RULE), ctx
            if rule.lifetime == LIFETIME_TEMPORARY:
                if rule.action != ALLOW:
                    return ProxyAction(DENY, REASON_TEMPORARY_RULE), ctx
                if ctx is not None and req.url in ctx.inventory.external_links:
                    if not record_and_check(ctx.ledger, req.url, self.threshold):
                        return ProxyAction(DENY, REASON_LEAKAGE_THRESHOLD), ctx
                return ProxyAction(FORWARD, REASON_TEMPORARY_RULE), ctx
            if rule.action == ALLOW:
                return ProxyAction(FORWARD, REASON_PERMANENT_ALLOW), ctx
            return ProxyAction(DENY, REASON_PERMANENT_DENY), ctx

    def handle_request(self, req: ProxyRequest) -> ProxyAction:
        """Full decision including the prompt/hold path; returns forward|deny."""
        action, ctx = self.decide(req)
        if action.kind == PROMPT:
            ticket = self.alerts.enqueue(
                req.url, req.referrer, ctx.context_id if ctx else None
            )
            with self._lock:
                self.counters["prompted"] += 1
            self.alerts.await_decision(ticket, self.config.alert_timeout_secs)
            action = self._action_for_ticket(ticket)
        with self._lock:
            self.counters["forwarded" if action.kind == FORWARD else "denied"] += 1
        return action

    @staticmethod
    def _action_for_ticket(ticket: AlertTicket) -> ProxyAction:
        if ticket.decision_action == "allow":
            if ticket.decision_scope == SCOPE_PERMANENT:
                return ProxyAction(FORWARD, REASON_PERMANENT_ALLOW)
            return ProxyAction(FORWARD, REASON_TEMPORARY_RULE)
        if ticket.decision_scope == SCOPE_PERMANENT:
            return ProxyAction(DENY, REASON_PERMANENT_DENY)
        if ticket.decision_scope == SCOPE_TEMPORARY:
            return ProxyAction(DENY, REASON_TEMPORARY_RULE)
        return ProxyAction(DENY, REASON_NO_RULE)  # expired or queue-capped

    def decide_ticket(
        self,
        ticket_id: str,
        action: str,
        scope: str,
        pattern: RulePattern | None = None,
    ) -> AlertTicket:
        """Operator decision: create the scoped rule, then wake the request.

        Default patterns: exact request URL for temporary scope, registrable
        domain for permanent. A temporary decision whose context is gone
        creates no rule (one-shot); the repeat request will re-prompt.
        """
        with self._lock:
            ticket = self.alerts.get(ticket_id)
            if ticket is None:
                raise KeyError(ticket_id)
            if ticket.state != "pending":
                raise ValueError("already decided")
            if scope == SCOPE_TEMPORARY:
                if ticket.context_id is not None and any(
                    c.context_id == ticket.context_id for c in self.contexts.values()
                ):
                    self.store.add_temporary(
                        ticket.context_id,
                        pattern or RulePattern(KIND_EXACT, ticket.request_url.canonical),
                        action,
                        origin=ORIGIN_USER,
                    )
            elif scope == SCOPE_PERMANENT:
                self.store.add_permanent(
                    pattern
                    or RulePattern(
                        KIND_DOMAIN, registrable_domain(ticket.request_url.host)
                    ),
                    action,
                    origin=ORIGIN_USER,
                )
            logger.info(
                "alert %s decided: %s %s for %s", ticket_id, action, scope, ticket.request_url
            )
            return self.alerts.decide(ticket_id, action, scope)

    # -- responses ---------------------------------------------------------

    def _document_context_locked(self, req: ProxyRequest) -> PageContext:
        """Context an arriving HTML document belongs to.

        Top-level navigations own their context (established at request
        time; re-established here if evicted). A same-domain subdocument
        (frame, local link) merges into the referrer's live context, and its
        own URL becomes an alias for that context so requests it refers are
        attributed there too. An external or orphaned subdocument starts
        fresh under its own URL.
        """
        if req.referrer is None or self._looks_like_navigation(req):
            return self.contexts.get(req.url.canonical) or self._establish_locked(req.url)
        if is_local(req.url, req.referrer):
            parent = self.contexts.get(req.referrer.canonical)
            if parent is not None:
                key = req.url.canonical
                if self.contexts.get(key) is not parent:
                    self._drop_key_locked(key)
                    self.contexts[key] = parent
                return parent
        return self._establish_locked(req.url)

    def process_html(self, req: ProxyRequest, text: str) -> str:
        """Analyze one HTML document: inventory, temporary rules, injection."""
        stats = ExtractionStats()
        found = extract_static_links(text, base=req.url, stats=stats)
        with self._lock:
            ctx = self._document_context_locked(req)
            ctx.inventory.merge(found)
            ctx.ledger.set_link_count(ctx.inventory.n)
            register_temporary_rules(ctx.inventory, ctx, self.store)
            self.extraction_stats.merge(stats)
            self.counters["responses_rewritten"] += 1
        if self.config.inject_enabled:
            text = inject(text)
        return text

    def process_css(self, req: ProxyRequest, text: str) -> None:
        """Fold a stylesheet's url() links into the owning page's inventory."""
        stats = ExtractionStats()
        found = extract_css_urls(text, base=req.url, stats=stats)
        with self._lock:
            owner = None
            if req.referrer is not None:
                owner = self.contexts.get(req.referrer.canonical)
            if owner is None:
                owner = self.contexts.get(req.url.canonical)
            if owner is not None:
                for link in found:
                    owner.inventory.add(link)
                owner.ledger.set_link_count(owner.inventory.n)
                register_temporary_rules(owner.inventory, owner, self.store)
            self.extraction_stats.merge(stats)

    def note_passthrough(self) -> None:
        with self._lock:
            self.counters["responses_passthrough"] += 1

    def note(self, counter: str) -> None:
        with self._lock:
            self.counters[counter] += 1

    # -- snapshots / config --------------------------------------------------

    def set_threshold_bits(self, bits: int) -> None:
        if bits < 0:
            raise ValueError("threshold_bits must be >= 0")
        with self._lock:
            self.config.threshold_bits = bits
            self.threshold.max_bits = bits

    def contexts_snapshot(self) -> list[dict]:
        with self._lock:
            distinct = {ctx.context_id: ctx for ctx in self.contexts.values()}
            return [
                ctx.snapshot(self.threshold.max_bits)
                for ctx in sorted(distinct.values(), key=lambda c: (c.created_at, c.context_id))
            ]

    def rules_snapshot(self) -> list[dict]:
        with self._lock:
            return [rule.as_dict() for rule in self.store.all_rules()]

    def stats_snapshot(self) -> dict:
        with self._lock:
            tickets = self.alerts.history()
            return {
                "extraction": self.extraction_stats.as_dict(),
                "counters": dict(self.counters),
                "alerts": {
                    "total": len(tickets),
                    "pending": sum(1 for t in tickets if t.state == "pending"),
                    "decided": sum(1 for t in tickets if t.state == "decided"),
                    "expired": sum(1 for t in tickets if t.state == "expired"),
                },
            }

    def config_snapshot(self) -> dict:
        with self._lock:
            return {
                "listen": "%s:%d" % self.config.listen,
                "mgmt_listen": "%s:%d" % self.config.mgmt_listen,
                "threshold_bits": self.threshold.max_bits,
                "alert_timeout_secs": self.config.alert_timeout_secs,
                "inject_enabled": self.config.inject_enabled,
                "max_body_bytes": self.config.max_body_bytes,
                "nav_heuristic": self.config.nav_heuristic,
                "permanent_deny_overrides": self.config.permanent_deny_overrides,
                "rules_file": str(self.config.rules_file) if self.config.rules_file else None,
            }
