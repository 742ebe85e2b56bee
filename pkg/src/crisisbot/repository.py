"""News repository: an append-only JSON journal with an in-memory index.

Each line of the journal is one full record keyed by a stable id derived
from the canonical article URL; replaying the file rebuilds the store, the
newest line per id winning.  Listeners registered with add_listener hear
about every insert or replace, which is how knowledge-base conversion and
alert dispatch stay current.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator

from . import timeutil
from .crawler import canonicalize
from .preprocess import AnnotatedNews, NamedEntity

logger = logging.getLogger(__name__)

INSERTED = "inserted"
REPLACED = "replaced"
UNCHANGED = "unchanged"

Listener = Callable[["NewsRecord", str], None]


def record_id(url: str) -> str:
    """Stable id for an article URL; one id per canonical spelling."""
    return hashlib.sha256(canonicalize(url).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class NewsRecord:
    url: str
    date: dt.date
    title: str
    content: str
    entities: tuple[NamedEntity, ...]
    ingested_at: str
    id: str = field(init=False)

    def __post_init__(self):
        if not self.title.strip() or not self.content.strip():
            raise ValueError("record needs a title and content")
        object.__setattr__(self, "id", record_id(self.url))

    def same_story(self, other: "NewsRecord") -> bool:
        """True when only the ingestion timestamp could differ."""
        return (
            self.url == other.url
            and self.date == other.date
            and self.title == other.title
            and self.content == other.content
            and self.entities == other.entities
        )

    def surfaces(self) -> frozenset[str]:
        return frozenset(e.surface.lower() for e in self.entities)

    def to_json_line(self) -> str:
        return json.dumps({
            "url": self.url,
            "date": self.date.isoformat(),
            "title": self.title,
            "content": self.content,
            "entities": [
                {"surface": e.surface, "tag": e.tag, "span": list(e.span), "weight": e.weight}
                for e in self.entities
            ],
            "ingested_at": self.ingested_at,
        }, ensure_ascii=False)

    @classmethod
    def from_json_line(cls, line: str) -> "NewsRecord":
        raw = json.loads(line)
        return cls(
            url=raw["url"],
            date=dt.date.fromisoformat(raw["date"]),
            title=raw["title"],
            content=raw["content"],
            entities=tuple(
                NamedEntity(
                    surface=e["surface"],
                    tag=e["tag"],
                    span=(e["span"][0], e["span"][1]),
                    weight=e["weight"],
                )
                for e in raw["entities"]
            ),
            ingested_at=raw["ingested_at"],
        )


def record_from(annotated: AnnotatedNews, ingested_at: str | None = None) -> NewsRecord:
    return NewsRecord(
        url=annotated.news.url,
        date=annotated.news.date,
        title=annotated.news.title,
        content=annotated.news.content,
        entities=annotated.entities,
        ingested_at=ingested_at or timeutil.isoformat(timeutil.now()),
    )


class Repository:
    """Single-writer, multi-reader record store.

    Pass a journal path to persist across runs, or None for memory only.
    Queries hand back snapshots, so readers never see a half-applied write.
    """

    def __init__(self, path=None):
        self._path = path
        self._records: dict[str, NewsRecord] = {}
        self._arrival: dict[str, int] = {}
        self._next_arrival = 0
        self._lock = threading.Lock()
        self._listeners: list[Listener] = []
        self._fh = None
        if path is not None:
            self._replay(path)
            self._fh = open(path, "a", encoding="utf-8")

    def _replay(self, path) -> None:
        try:
            fh = open(path, encoding="utf-8")
        except FileNotFoundError:
            return
        with fh:
            for number, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = NewsRecord.from_json_line(line)
                except (ValueError, KeyError) as err:
                    logger.warning("journal %s:%d unreadable, skipped: %s", path, number, err)
                    continue
                self._remember(record)

    def _remember(self, record: NewsRecord) -> None:
        if record.id not in self._arrival:
            self._arrival[record.id] = self._next_arrival
            self._next_arrival += 1
        self._records[record.id] = record

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "Repository":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def __iter__(self) -> Iterator[NewsRecord]:
        with self._lock:
            return iter(list(self._records.values()))

    def add_listener(self, listener: Listener) -> None:
        """Register a callback fired as listener(record, outcome) after
        every successful insert or replace."""
        self._listeners.append(listener)

    def get(self, rec_id: str) -> NewsRecord:
        with self._lock:
            return self._records[rec_id]

    def insert(self, record: NewsRecord) -> str:
        """Store a record; returns inserted, replaced, or unchanged.

        A record equal to the stored one (timestamp aside) changes nothing.
        The journal line is written before memory is touched, so a failed
        write leaves the repository as it was.
        """
        with self._lock:
            existing = self._records.get(record.id)
            if existing is not None and existing.same_story(record):
                return UNCHANGED
            outcome = REPLACED if existing is not None else INSERTED
            if self._fh is not None:
                self._fh.write(record.to_json_line() + "\n")
                self._fh.flush()
            self._remember(record)
            listeners = list(self._listeners)
        for listener in listeners:
            listener(record, outcome)
        return outcome

    def insert_all(self, records: Iterable[NewsRecord]) -> dict[str, int]:
        counts = {INSERTED: 0, REPLACED: 0, UNCHANGED: 0}
        for record in records:
            counts[self.insert(record)] += 1
        return counts

    def _snapshot(self) -> list[NewsRecord]:
        with self._lock:
            return list(self._records.values())

    def _recency_key(self, record: NewsRecord):
        return (record.date, self._arrival.get(record.id, -1))

    def query(
        self,
        *,
        surface: str | None = None,
        tag: str | None = None,
        date_from: dt.date | None = None,
        date_to: dt.date | None = None,
    ) -> list[NewsRecord]:
        """Records matching every given clause, newest first.

        surface matches an entity surface case-insensitively; tag matches
        an entity tag; the date bounds are inclusive.
        """
        wanted_surface = surface.lower() if surface is not None else None
        results = []
        for record in self._snapshot():
            if wanted_surface is not None and wanted_surface not in record.surfaces():
                continue
            if tag is not None and all(e.tag != tag for e in record.entities):
                continue
            if date_from is not None and record.date < date_from:
                continue
            if date_to is not None and record.date > date_to:
                continue
            results.append(record)
        results.sort(key=self._recency_key, reverse=True)
        return results

    def related(self, rec_id: str, limit: int = 5) -> list[NewsRecord]:
        """Other records sharing entity surfaces, most shared first,
        recency breaking ties."""
        if limit < 0:
            raise ValueError("limit must be non-negative")
        origin = self.get(rec_id)
        origin_surfaces = origin.surfaces()
        scored = []
        for record in self._snapshot():
            if record.id == origin.id:
                continue
            shared = len(origin_surfaces & record.surfaces())
            if shared:
                scored.append((shared, record))
        scored.sort(key=lambda item: (item[0], self._recency_key(item[1])), reverse=True)
        return [record for _, record in scored[:limit]]
