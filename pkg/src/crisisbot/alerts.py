"""Subscriptions and alert dispatch for freshly stored news.

Subscribers register a role, an outbox channel, and optional topics
(entity surfaces or ontology tags; empty means everything).  When a
record lands in the repository, every matching subscriber gets one
SMS-like message appended to their channel's outbox file, exactly once
per distinct content of that record.  Editorial members hold posting
rights and receive all alerts; users without a subscription can still
pull the latest news.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, IO

import requests

from . import timeutil
from .converter import excerpt
from .repository import INSERTED, REPLACED, NewsRecord, Repository

logger = logging.getLogger(__name__)

SUBSCRIBED = "subscribed"
EDITORIAL = "editorial"
ROLES = (SUBSCRIBED, EDITORIAL)

ON_SUBSCRIBE = "on-subscribe"
ON_DEMAND = "on-demand"
ON_ALERT = "on-alert"
MODES = (ON_SUBSCRIBE, ON_DEMAND, ON_ALERT)

# SMS-like ceiling for a rendered message body.
BODY_LIMIT = 480

_CHANNEL = re.compile(r"^[a-z0-9][a-z0-9_-]*$")

SUBSCRIBER_FILE = "subscribers.ndjson"

Poster = Callable[[str, str], None]


def _normalize_topics(topics) -> tuple[str, ...]:
    cleaned = {t.strip().lower() for t in topics if t and t.strip()}
    return tuple(sorted(cleaned))


def _subscriber_id(channel: str, topics: tuple[str, ...]) -> str:
    key = "\n".join((channel,) + topics)
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class Subscriber:
    id: str
    role: str
    channel: str
    topics: tuple[str, ...]

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not _CHANNEL.match(self.channel):
            raise ValueError(f"channel must be a lowercase slug, got {self.channel!r}")
        if self.role == EDITORIAL and self.topics:
            raise ValueError("editorial members receive everything; topics must be empty")
        if self.topics != _normalize_topics(self.topics):
            raise ValueError(f"topics must be normalized, got {self.topics!r}")

    def wants(self, record: NewsRecord) -> bool:
        """Whether the record touches any of this subscriber's topics."""
        if not self.topics:
            return True
        haystack = set(record.surfaces()) | {e.tag for e in record.entities}
        return any(topic in haystack for topic in self.topics)

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_json_line(cls, line: str) -> "Subscriber":
        raw = json.loads(line)
        return cls(
            id=raw["id"],
            role=raw["role"],
            channel=raw["channel"],
            topics=tuple(raw["topics"]),
        )


@dataclass(frozen=True)
class AlertMessage:
    to: str
    record_id: str
    title: str
    excerpt: str
    url: str
    mode: str
    created_at: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def body(self) -> str:
        """Title, excerpt, and link as one SMS-like text, capped at 480."""
        full = f"{self.title}\n{self.excerpt}\n{self.url}"
        if len(full) <= BODY_LIMIT:
            return full
        room = BODY_LIMIT - len(self.title) - len(self.url) - len("\n\n") - len("...")
        if room > 0:
            return f"{self.title}\n{self.excerpt[:room]}...\n{self.url}"
        return full[:BODY_LIMIT]

    @property
    def fingerprint(self) -> str:
        key = "\n".join((self.title, self.excerpt, self.url))
        return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]

    def to_json_line(self) -> str:
        payload = asdict(self)
        payload["body"] = self.body
        return json.dumps(payload, ensure_ascii=False)

    @classmethod
    def from_json_line(cls, line: str) -> "AlertMessage":
        raw = json.loads(line)
        return cls(
            to=raw["to"],
            record_id=raw["record_id"],
            title=raw["title"],
            excerpt=raw["excerpt"],
            url=raw["url"],
            mode=raw["mode"],
            created_at=raw["created_at"],
        )


def read_outbox(path) -> list[AlertMessage]:
    """All messages in one outbox file, skipping lines that do not parse."""
    messages = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                messages.append(AlertMessage.from_json_line(line))
            except (ValueError, KeyError):
                logger.warning("%s:%d: skipping unreadable outbox line", path, lineno)
    return messages


def _post_webhook(url: str, payload: str) -> None:
    requests.post(
        url,
        data=payload.encode("utf-8"),
        headers={"Content-Type": "application/json"},
        timeout=10,
    )


class AlertNews:
    """Subscription registry plus dispatcher over a repository.

    Attaches itself as a repository listener, so inserts and replacements
    fan out on construction-time wiring alone.  Outboxes and the
    subscriber registry live as newline-delimited JSON under one
    directory and are replayed on startup, which is what makes dispatch
    at-most-once per (subscriber, record, mode, content): a re-run of the
    same pipeline appends nothing new.
    """

    def __init__(
        self,
        repository: Repository,
        outbox_dir,
        *,
        webhooks: dict[str, str] | None = None,
        poster: Poster = _post_webhook,
    ):
        self._repo = repository
        self._dir = Path(outbox_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._webhooks = dict(webhooks or {})
        self._poster = poster
        self._lock = threading.Lock()
        self._subscribers: dict[str, Subscriber] = {}
        self._seen: set[tuple[str, str, str, str]] = set()
        self._outboxes: dict[str, IO[str]] = {}
        self._load_subscribers()
        self._replay_outboxes()
        repository.add_listener(self._on_event)

    # -- persistence ------------------------------------------------

    def _load_subscribers(self) -> None:
        path = self._dir / SUBSCRIBER_FILE
        if not path.exists():
            return
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    sub = Subscriber.from_json_line(line)
                except (ValueError, KeyError):
                    logger.warning("%s:%d: skipping unreadable subscriber", path, lineno)
                    continue
                self._subscribers[sub.id] = sub

    def _replay_outboxes(self) -> None:
        for path in sorted(self._dir.glob("*.ndjson")):
            if path.name == SUBSCRIBER_FILE:
                continue
            for message in read_outbox(path):
                self._seen.add(
                    (message.to, message.record_id, message.mode, message.fingerprint)
                )

    def _outbox(self, channel: str) -> IO[str]:
        handle = self._outboxes.get(channel)
        if handle is None:
            handle = open(self._dir / f"{channel}.ndjson", "a", encoding="utf-8")
            self._outboxes[channel] = handle
        return handle

    def close(self) -> None:
        with self._lock:
            for handle in self._outboxes.values():
                handle.close()
            self._outboxes.clear()

    def __enter__(self) -> "AlertNews":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- subscriptions ----------------------------------------------

    def subscribe(self, role: str, topics, channel: str) -> Subscriber:
        """Register a subscriber; repeating a registration returns it."""
        sub = Subscriber(
            id=_subscriber_id(channel, _normalize_topics(topics)),
            role=role,
            channel=channel,
            topics=_normalize_topics(topics),
        )
        with self._lock:
            existing = self._subscribers.get(sub.id)
            if existing is not None:
                return existing
            with open(self._dir / SUBSCRIBER_FILE, "a", encoding="utf-8") as fh:
                fh.write(sub.to_json_line() + "\n")
            self._subscribers[sub.id] = sub
        return sub

    def subscriber(self, sub_id: str) -> Subscriber | None:
        with self._lock:
            return self._subscribers.get(sub_id)

    def subscribers(self) -> tuple[Subscriber, ...]:
        with self._lock:
            return tuple(self._subscribers.values())

    # -- dispatch ---------------------------------------------------

    def _on_event(self, record: NewsRecord, outcome: str) -> None:
        if outcome in (INSERTED, REPLACED):
            self.dispatch_on_insert(record)

    def dispatch_on_insert(self, record: NewsRecord) -> int:
        """Fan a stored record out to matching subscribers."""
        return self._dispatch(record, ON_SUBSCRIBE)

    def post_alert(self, author: Subscriber, record_id: str) -> int:
        """Fan out an alert for an existing record on a member's behalf."""
        with self._lock:
            registered = self._subscribers.get(author.id)
        if registered != author:
            raise PermissionError("posting alerts requires a subscribed or editorial account")
        record = self._repo.get(record_id)
        return self._dispatch(record, ON_ALERT)

    def _dispatch(self, record: NewsRecord, mode: str) -> int:
        summary = excerpt(record.content)
        created = timeutil.isoformat(timeutil.now())
        deliveries: list[tuple[str, AlertMessage]] = []
        with self._lock:
            for sub in self._subscribers.values():
                if not sub.wants(record):
                    continue
                message = AlertMessage(
                    to=sub.id,
                    record_id=record.id,
                    title=record.title,
                    excerpt=summary,
                    url=record.url,
                    mode=mode,
                    created_at=created,
                )
                key = (sub.id, record.id, mode, message.fingerprint)
                if key in self._seen:
                    continue
                handle = self._outbox(sub.channel)
                handle.write(message.to_json_line() + "\n")
                handle.flush()
                self._seen.add(key)
                deliveries.append((sub.channel, message))
        for channel, message in deliveries:
            hook = self._webhooks.get(channel)
            if hook is None:
                continue
            try:
                self._poster(hook, message.to_json_line())
            except Exception as exc:
                # best effort by design: no retries, the outbox line stands
                logger.warning("webhook for %s failed: %s", channel, exc)
        return len(deliveries)

    # -- reading ----------------------------------------------------

    def latest(self, limit: int = 10) -> list[NewsRecord]:
        """Newest stored records; public, no subscription needed."""
        if limit < 0:
            raise ValueError("limit must be non-negative")
        return self._repo.query()[:limit]

    def on_demand(self, subscriber: Subscriber, limit: int = 10) -> list[NewsRecord]:
        """Newest records matching a subscriber's topics, pulled on request."""
        with self._lock:
            registered = self._subscribers.get(subscriber.id)
        if registered != subscriber:
            raise PermissionError("on-demand news requires a subscription")
        return [r for r in self._repo.query() if subscriber.wants(r)][:limit]
