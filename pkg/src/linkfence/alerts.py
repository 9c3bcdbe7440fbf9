"""Connection-alert queue: held requests awaiting a human allow/deny.

Each Prompt decision produces one ticket. The proxied request blocks on its
ticket's event (never on the shared state lock) until an operator decides or
the timeout expires; expiry resolves as deny. The queue is capped: past the
cap new tickets are born auto-denied.
"""
from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .urls import AbsoluteUrl

STATE_PENDING = "pending"
STATE_DECIDED = "decided"
STATE_EXPIRED = "expired"

SCOPE_TEMPORARY = "temporary"
SCOPE_PERMANENT = "permanent"


@dataclass
class AlertTicket:
    id: str
    request_url: AbsoluteUrl
    referrer: AbsoluteUrl | None
    context_id: str | None
    created_at: datetime
    state: str = STATE_PENDING
    decision_action: str | None = None  # allow | deny once decided
    decision_scope: str | None = None  # temporary | permanent once decided
    _event: threading.Event = field(default_factory=threading.Event, repr=False)

    def as_dict(self) -> dict:
        return {
            "id": self.id,
            "request_url": self.request_url.canonical,
            "referrer": self.referrer.canonical if self.referrer else None,
            "context_id": self.context_id,
            "created_at": self.created_at.isoformat(),
            "state": self.state,
            "decision_action": self.decision_action,
            "decision_scope": self.decision_scope,
        }


class AlertQueue:
    """One decider, many producers; decisions wake exactly the held request."""

    def __init__(self, capacity: int = 256):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._tickets: dict[str, AlertTicket] = {}
        self._arrival = threading.Condition(self._lock)

    def enqueue(
        self,
        request_url: AbsoluteUrl,
        referrer: AbsoluteUrl | None,
        context_id: str | None,
    ) -> AlertTicket:
        ticket = AlertTicket(
            id=uuid.uuid4().hex[:12],
            request_url=request_url,
            referrer=referrer,
            context_id=context_id,
            created_at=datetime.now(timezone.utc),
        )
        with self._lock:
            if sum(1 for t in self._tickets.values() if t.state == STATE_PENDING) >= self.capacity:
                ticket.state = STATE_DECIDED
                ticket.decision_action = "deny"
                ticket._event.set()
            self._tickets[ticket.id] = ticket
            self._arrival.notify_all()
        return ticket

    def get(self, ticket_id: str) -> AlertTicket | None:
        with self._lock:
            return self._tickets.get(ticket_id)

    def pending(self) -> list[AlertTicket]:
        with self._lock:
            return [t for t in self._tickets.values() if t.state == STATE_PENDING]

    def history(self) -> list[AlertTicket]:
        with self._lock:
            return sorted(self._tickets.values(), key=lambda t: t.created_at)

    def wait_for_pending(self, timeout: float) -> list[AlertTicket]:
        """Long-poll helper: block until a pending ticket exists or timeout."""
        deadline = timeout
        with self._lock:
            self._arrival.wait_for(
                lambda: any(t.state == STATE_PENDING for t in self._tickets.values()),
                timeout=deadline,
            )
            return [t for t in self._tickets.values() if t.state == STATE_PENDING]

    def decide(self, ticket_id: str, action: str, scope: str) -> AlertTicket:
        """Resolve a pending ticket; raises KeyError / ValueError on misuse.

        A ticket is decided at most once: deciding a non-pending ticket is an
        error surfaced to the second decider.
        """
        if action not in ("allow", "deny"):
            raise ValueError(f"bad action {action!r}")
        if scope not in (SCOPE_TEMPORARY, SCOPE_PERMANENT):
            raise ValueError(f"bad scope {scope!r}")
        with self._lock:
            ticket = self._tickets[ticket_id]
            if ticket.state != STATE_PENDING:
                raise ValueError("already decided")
            ticket.state = STATE_DECIDED
            ticket.decision_action = action
            ticket.decision_scope = scope
            ticket._event.set()
            return ticket

    def await_decision(self, ticket: AlertTicket, timeout: float) -> str:
        """Block the held request until decided or expired; returns allow|deny."""
        if not ticket._event.wait(timeout):
            with self._lock:
                if ticket.state == STATE_PENDING:
                    ticket.state = STATE_EXPIRED
                    ticket.decision_action = "deny"
                    ticket._event.set()
        return ticket.decision_action or "deny"
