"""HTTP portal: chat, news feed, related tips, and alert endpoints.

The Portal class is the framework-free core: it owns sessions, the
conversation log, and the access log, and delegates storage and dispatch
to the repository and AlertNews.  build_app wraps it in a FastAPI
application speaking the JSON wire format; build_portal wires a portal
from a config file.

Matching is stateless: the markup has no dialogue-context elements, so a
session exists for logging and client continuity only, and one session's
turns can never change another's answers.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import secrets
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from pydantic import BaseModel

from . import timeutil
from .aiml import (
    DEFAULT_FALLBACK_TEXT,
    KnowledgeBase,
    Response,
    default_greetings,
    load_knowledge_file,
    normalize,
    render,
)
from .alerts import AlertNews
from .converter import convert_all, default_bank, default_ontology, excerpt
from .emotion import classify_emotion
from .repository import NewsRecord, Repository

logger = logging.getLogger(__name__)

# SMS transport ceiling; applied when a chat request sets mobile=true.
MOBILE_LIMIT = 480


@dataclass
class Session:
    session_id: str
    started_at: str
    turns: int = 0


@dataclass(frozen=True)
class ConversationLogEntry:
    session_id: str
    turn: int
    user_text: str
    response_text: str
    matched: bool
    source_id: str | None
    at: str

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_json_line(cls, line: str) -> "ConversationLogEntry":
        raw = json.loads(line)
        return cls(**{f.name: raw[f.name] for f in dataclasses.fields(cls)})


@dataclass(frozen=True)
class AccessLogEntry:
    method: str
    path: str
    status: int
    duration_ms: int
    session_id: str | None
    at: str

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_json_line(cls, line: str) -> "AccessLogEntry":
        raw = json.loads(line)
        return cls(**{f.name: raw[f.name] for f in dataclasses.fields(cls)})


def _read_log(path, parser):
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                entries.append(parser(line))
            except (ValueError, KeyError, TypeError):
                logger.warning("%s:%d: skipping unreadable log line", path, lineno)
    return entries


def read_conversation_log(path) -> list[ConversationLogEntry]:
    return _read_log(path, ConversationLogEntry.from_json_line)


def read_access_log(path) -> list[AccessLogEntry]:
    return _read_log(path, AccessLogEntry.from_json_line)


def summarize(record: NewsRecord) -> dict:
    return {
        "id": record.id,
        "title": record.title,
        "url": record.url,
        "date": record.date.isoformat(),
        "excerpt": excerpt(record.content),
        "entities": [e.rendered for e in record.entities],
    }


class Portal:
    """Sessions, logs, and the operations behind every endpoint."""

    def __init__(
        self,
        kb: KnowledgeBase,
        repository: Repository,
        alerts: AlertNews,
        *,
        conversation_log=None,
        access_log=None,
    ):
        self.kb = kb
        self.repo = repository
        self.alerts = alerts
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._conversation_path = Path(conversation_log) if conversation_log else None
        self._access_path = Path(access_log) if access_log else None
        self.log_failures = 0

    # -- chat ---------------------------------------------------------

    def chat(self, session_id: str | None, text: str, mobile: bool = False) -> dict:
        """One conversation turn: match, render, emote, log, answer.

        An unknown or missing session id starts a fresh session with a
        server-minted token; the reply always carries the authoritative id.
        """
        if not text or not text.strip():
            raise ValueError("text must be non-empty")
        tokens = normalize(text)
        result = self.kb.match(tokens) if tokens else None
        response = render(result, self.kb.fallback)
        if response.cue is None:
            cue = classify_emotion(text) or classify_emotion(response.text)
            if cue is not None:
                response = Response(
                    text=response.text,
                    cue=cue,
                    push=response.push,
                    matched=response.matched,
                )
        source_id = result.category.source_id if result is not None else None
        with self._lock:
            session = self._sessions.get(session_id) if session_id else None
            if session is None:
                session = Session(
                    session_id=secrets.token_urlsafe(16),
                    started_at=timeutil.isoformat(timeutil.now()),
                )
                self._sessions[session.session_id] = session
            session.turns += 1
            entry = ConversationLogEntry(
                session_id=session.session_id,
                turn=session.turns,
                user_text=text,
                response_text=response.text,
                matched=response.matched,
                source_id=source_id,
                at=timeutil.isoformat(timeutil.now()),
            )
            self._append(self._conversation_path, entry.to_json_line())
        wire_text = response.text
        if mobile and len(wire_text) > MOBILE_LIMIT:
            wire_text = wire_text[: MOBILE_LIMIT - 3] + "..."
        return {
            "session_id": session.session_id,
            "text": wire_text,
            "cue": list(response.cue.anims) if response.cue else None,
            "push_url": response.push.url if response.push else None,
            "matched": response.matched,
        }

    # -- news ---------------------------------------------------------

    def news(
        self,
        limit: int = 20,
        tag: str | None = None,
        surface: str | None = None,
    ) -> list[dict]:
        if limit < 0:
            raise ValueError("limit must be non-negative")
        records = self.repo.query(tag=tag, surface=surface)
        return [summarize(r) for r in records[:limit]]

    def tips(self, rec_id: str, limit: int = 5) -> list[dict]:
        return [summarize(r) for r in self.repo.related(rec_id, limit=limit)]

    # -- alerts ---------------------------------------------------------

    def subscribe(self, role: str, topics, channel: str) -> dict:
        sub = self.alerts.subscribe(role, topics, channel)
        return {
            "id": sub.id,
            "role": sub.role,
            "channel": sub.channel,
            "topics": list(sub.topics),
        }

    def post_alert(self, subscriber_id: str, record_id: str) -> dict:
        author = self.alerts.subscriber(subscriber_id)
        if author is None:
            raise PermissionError("unknown subscriber")
        delivered = self.alerts.post_alert(author, record_id)
        return {"delivered": delivered}

    def alerts_latest(self, limit: int = 10) -> list[dict]:
        return [summarize(r) for r in self.alerts.latest(limit)]

    # -- logging --------------------------------------------------------

    def log_access(self, entry: AccessLogEntry) -> None:
        """Append an access-log line; a failed write never fails a request."""
        try:
            with self._lock:
                self._append(self._access_path, entry.to_json_line())
        except OSError as exc:
            self.log_failures += 1
            logger.warning("access log write failed: %s", exc)

    @staticmethod
    def _append(path: Path | None, line: str) -> None:
        if path is None:
            return
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


@dataclass(frozen=True)
class ServiceConfig:
    """Service settings: where to listen, where data lives, what to load."""

    data_dir: str
    kb_files: tuple[str, ...] = ()
    host: str = "127.0.0.1"
    port: int = 8080
    fallback_text: str = DEFAULT_FALLBACK_TEXT

    def __post_init__(self):
        if not str(self.data_dir).strip():
            raise ValueError("data_dir must be set")
        if not isinstance(self.port, int) or not 0 < self.port < 65536:
            raise ValueError(f"port out of range: {self.port!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ServiceConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "data_dir" not in raw:
            raise ValueError("config needs data_dir")
        values = dict(raw)
        values["kb_files"] = tuple(values.get("kb_files", ()))
        return cls(**values)

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def build_portal(config: ServiceConfig) -> Portal:
    """Wire a portal from config: storage, knowledge, alerts, live updates."""
    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    repo = Repository(data_dir / "repository.ndjson")
    kb = KnowledgeBase(config.fallback_text)
    kb.add_all(default_greetings())
    for kb_file in config.kb_files:
        kb.add_all(load_knowledge_file(kb_file))
    alerts = AlertNews(repo, data_dir / "outbox")
    bank = default_bank()
    ontology = default_ontology()
    # oldest first, so a newer story's answer survives a pattern collision
    kb.add_all(reversed(convert_all(repo.query(), bank, ontology)))

    def refresh_kb(record: NewsRecord, outcome: str) -> None:
        kb.add_all(convert_all([record], bank, ontology))

    repo.add_listener(refresh_kb)
    return Portal(
        kb,
        repo,
        alerts,
        conversation_log=data_dir / "conversation.ndjson",
        access_log=data_dir / "access.ndjson",
    )


class _ChatIn(BaseModel):
    session_id: str | None = None
    text: str
    mobile: bool = False


class _SubscribeIn(BaseModel):
    role: str
    topics: list[str] = []
    channel: str


class _AlertIn(BaseModel):
    subscriber_id: str
    record_id: str


def build_app(portal: Portal) -> FastAPI:
    app = FastAPI(title="crisis news portal")

    @app.middleware("http")
    async def access_log(request: Request, call_next):
        start = time.perf_counter()
        response = await call_next(request)
        portal.log_access(
            AccessLogEntry(
                method=request.method,
                path=request.url.path,
                status=response.status_code,
                duration_ms=int((time.perf_counter() - start) * 1000),
                session_id=getattr(request.state, "session_id", None),
                at=timeutil.isoformat(timeutil.now()),
            )
        )
        return response

    @app.post("/chat")
    def chat(body: _ChatIn, request: Request):
        try:
            payload = portal.chat(body.session_id, body.text, mobile=body.mobile)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        request.state.session_id = payload["session_id"]
        return payload

    @app.get("/news")
    def news(limit: int = 20, tag: str | None = None, surface: str | None = None):
        try:
            return portal.news(limit=limit, tag=tag, surface=surface)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/news/{rec_id}/tips")
    def tips(rec_id: str, limit: int = 5):
        try:
            return portal.tips(rec_id, limit=limit)
        except KeyError:
            raise HTTPException(status_code=404, detail="no such record")
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/subscribe")
    def subscribe(body: _SubscribeIn):
        try:
            return portal.subscribe(body.role, body.topics, body.channel)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.post("/alerts")
    def post_alert(body: _AlertIn):
        try:
            return portal.post_alert(body.subscriber_id, body.record_id)
        except PermissionError as exc:
            raise HTTPException(status_code=403, detail=str(exc))
        except KeyError:
            raise HTTPException(status_code=404, detail="no such record")

    @app.get("/alerts/latest")
    def alerts_latest(limit: int = 10):
        try:
            return portal.alerts_latest(limit=limit)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    return app
