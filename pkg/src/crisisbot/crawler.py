"""Polite breadth-first news crawler with pluggable page fetching.

The crawl is driven by a single coordinator that owns the frontier and the
seen-set; fetches are fanned out to worker threads, at most one in-flight
request per host.  Every admission decision lands in the crawl log, so the
log replays the whole run.
"""

from __future__ import annotations

import json
import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Callable, Iterator, NamedTuple
from urllib.parse import urljoin, urlsplit, urlunsplit

import requests

from . import timeutil

logger = logging.getLogger(__name__)

FETCHED = "fetched"
SKIPPED_DUPLICATE = "skipped-duplicate"
SKIPPED_HOST = "skipped-host"
ERROR = "error"

_DEFAULT_PORTS = {"http": 80, "https": 443}
_CONFIG_KEYS = {
    "roots", "max_depth", "max_pages", "allowed_hosts", "fetch_delay_ms", "timeout_ms",
}
_USER_AGENT = "crisisbot/0.1"


def canonicalize(url: str) -> str:
    """One spelling per page: lowercase scheme and host, no default port,
    no fragment, "/" for an empty path.  Idempotent.  Only http and https
    URLs are valid; anything else raises ValueError.
    """
    parts = urlsplit(url)
    scheme = parts.scheme.lower()
    if scheme not in _DEFAULT_PORTS:
        raise ValueError(f"not a fetchable URL: {url!r}")
    host = parts.hostname
    if not host:
        raise ValueError(f"URL has no host: {url!r}")
    try:
        port = parts.port
    except ValueError as err:
        raise ValueError(f"bad port in URL: {url!r}") from err
    netloc = host if port in (None, _DEFAULT_PORTS[scheme]) else f"{host}:{port}"
    return urlunsplit((scheme, netloc, parts.path or "/", parts.query, ""))


def host_of(url: str) -> str:
    host = urlsplit(url).hostname
    if not host:
        raise ValueError(f"URL has no host: {url!r}")
    return host


@dataclass(frozen=True)
class CrawlConfig:
    """Where to crawl and how hard.  Hosts are an exact allow-list; every
    root must sit on an allowed host."""

    roots: tuple[str, ...]
    allowed_hosts: frozenset[str]
    max_depth: int = 1
    max_pages: int = 50
    fetch_delay_ms: int = 1000
    timeout_ms: int = 10000

    def __post_init__(self):
        if not self.roots:
            raise ValueError("config needs at least one root URL")
        if not self.allowed_hosts:
            raise ValueError("config needs at least one allowed host")
        object.__setattr__(self, "roots", tuple(canonicalize(r) for r in self.roots))
        object.__setattr__(
            self, "allowed_hosts", frozenset(h.lower() for h in self.allowed_hosts)
        )
        for name in ("max_depth", "max_pages", "fetch_delay_ms", "timeout_ms"):
            if not isinstance(getattr(self, name), int):
                raise ValueError(f"{name} must be an integer")
        if self.max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        if self.max_pages < 1:
            raise ValueError("max_pages must be positive")
        if self.fetch_delay_ms < 0:
            raise ValueError("fetch_delay_ms must be non-negative")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be positive")
        for root in self.roots:
            if host_of(root) not in self.allowed_hosts:
                raise ValueError(f"root host not in allowed_hosts: {root}")

    @classmethod
    def from_dict(cls, raw: dict) -> "CrawlConfig":
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for required in ("roots", "allowed_hosts"):
            if required not in raw:
                raise ValueError(f"config key missing: {required}")
        kwargs = dict(raw)
        kwargs["roots"] = tuple(kwargs["roots"])
        kwargs["allowed_hosts"] = frozenset(kwargs["allowed_hosts"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "CrawlConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "roots": list(self.roots),
            "max_depth": self.max_depth,
            "max_pages": self.max_pages,
            "allowed_hosts": sorted(self.allowed_hosts),
            "fetch_delay_ms": self.fetch_delay_ms,
            "timeout_ms": self.timeout_ms,
        }


class FetchResult(NamedTuple):
    status: int
    content_type: str
    body: str


Fetcher = Callable[[str, int], FetchResult]


@dataclass(frozen=True)
class FetchedPage:
    url: str
    depth: int
    status: int
    content_type: str
    body: str
    fetched_at: str


@dataclass(frozen=True)
class CrawlLogEntry:
    url: str
    depth: int
    outcome: str
    status: int | None = None
    duration_ms: int | None = None
    message: str | None = None

    def to_json(self) -> str:
        record = {
            "url": self.url,
            "depth": self.depth,
            "outcome": self.outcome,
            "status": self.status,
            "duration_ms": self.duration_ms,
        }
        if self.message is not None:
            record["message"] = self.message
        return json.dumps(record, ensure_ascii=False)

    @classmethod
    def from_dict(cls, raw: dict) -> "CrawlLogEntry":
        return cls(
            url=raw["url"],
            depth=raw["depth"],
            outcome=raw["outcome"],
            status=raw.get("status"),
            duration_ms=raw.get("duration_ms"),
            message=raw.get("message"),
        )


class CrawlLogWriter:
    """Appends one JSON line per crawl decision to a file."""

    def __init__(self, path):
        self._fh = open(path, "a", encoding="utf-8")

    def __call__(self, entry: CrawlLogEntry) -> None:
        self._fh.write(entry.to_json() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "CrawlLogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_crawl_log(path) -> list[CrawlLogEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(CrawlLogEntry.from_dict(json.loads(line)))
    return entries


def http_fetcher(url: str, timeout_ms: int) -> FetchResult:
    response = requests.get(
        url, timeout=timeout_ms / 1000.0, headers={"User-Agent": _USER_AGENT}
    )
    content_type = response.headers.get("Content-Type", "")
    if "charset" not in content_type.lower():
        # no declared encoding: prefer UTF-8 over the legacy latin-1 default
        response.encoding = "utf-8"
    return FetchResult(response.status_code, content_type, response.text)


class _AnchorCollector(HTMLParser):
    def __init__(self):
        super().__init__()
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "a":
            for name, value in attrs:
                if name == "href" and value:
                    self.hrefs.append(value)
                    break


def extract_links(page: FetchedPage) -> list[str]:
    """Unique outgoing page URLs in first-seen order.

    Anchor targets are resolved against the page URL and canonicalized;
    non-web links (mailto, javascript, fragments-only) are dropped.
    """
    collector = _AnchorCollector()
    try:
        collector.feed(page.body)
        collector.close()
    except Exception as err:
        logger.warning("could not parse links at %s: %s", page.url, err)
        return []
    links: list[str] = []
    seen: set[str] = set()
    for href in collector.hrefs:
        try:
            cleaned = canonicalize(urljoin(page.url, href.strip()))
        except ValueError:
            continue
        if cleaned not in seen:
            seen.add(cleaned)
            links.append(cleaned)
    return links


def _is_markup(content_type: str) -> bool:
    base = content_type.split(";", 1)[0].strip().lower()
    return "html" in base or "xml" in base


def _take_wave(frontier: deque, limit: int) -> list[tuple[str, int]]:
    """Pop up to limit frontier entries with pairwise-distinct hosts,
    keeping everything else in order."""
    wave: list[tuple[str, int]] = []
    hosts: set[str] = set()
    leftover: list[tuple[str, int]] = []
    while frontier and len(wave) < limit:
        url, depth = frontier.popleft()
        host = host_of(url)
        if host in hosts:
            leftover.append((url, depth))
        else:
            hosts.add(host)
            wave.append((url, depth))
    for item in reversed(leftover):
        frontier.appendleft(item)
    return wave


def _fetch_one(url, timeout_ms, wait, fetcher, clock, sleep):
    if wait > 0:
        sleep(wait)
    start = clock()
    try:
        result = fetcher(url, timeout_ms)
        error = None
    except Exception as err:
        result = None
        error = str(err) or type(err).__name__
    return start, clock(), result, error


def crawl(
    config: CrawlConfig,
    fetcher: Fetcher = http_fetcher,
    *,
    log: Callable[[CrawlLogEntry], None] | None = None,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
    concurrency: int = 1,
) -> Iterator[FetchedPage]:
    """Breadth-first crawl from config.roots, yielding each fetched page.

    Each canonical URL is fetched at most once; off-host and duplicate
    links are logged and dropped at admission.  Successive requests to one
    host start at least fetch_delay_ms apart.  Fetch errors and non-2xx
    statuses are logged and do not stop the crawl, nor do they count
    against max_pages.  clock and sleep exist so tests can fake time.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be positive")
    emit = log if log is not None else (lambda entry: None)
    seen: set[str] = set()
    frontier: deque[tuple[str, int]] = deque()

    def admit(url: str, depth: int) -> None:
        if url in seen:
            emit(CrawlLogEntry(url=url, depth=depth, outcome=SKIPPED_DUPLICATE))
            return
        if host_of(url) not in config.allowed_hosts:
            emit(CrawlLogEntry(url=url, depth=depth, outcome=SKIPPED_HOST))
            return
        seen.add(url)
        frontier.append((url, depth))

    for root in config.roots:
        admit(root, 0)

    fetched_count = 0
    last_start: dict[str, float] = {}
    delay_s = config.fetch_delay_ms / 1000.0

    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        while frontier and fetched_count < config.max_pages:
            wave = _take_wave(frontier, min(concurrency, config.max_pages - fetched_count))
            dispatched = []
            for url, depth in wave:
                host = host_of(url)
                wait = 0.0
                if host in last_start:
                    wait = max(0.0, delay_s - (clock() - last_start[host]))
                future = pool.submit(
                    _fetch_one, url, config.timeout_ms, wait, fetcher, clock, sleep
                )
                dispatched.append((url, depth, host, future))
            for url, depth, host, future in dispatched:
                start, end, result, error = future.result()
                last_start[host] = start
                duration = int(round((end - start) * 1000))
                if error is not None:
                    emit(CrawlLogEntry(url=url, depth=depth, outcome=ERROR,
                                       duration_ms=duration, message=error))
                    continue
                if not 200 <= result.status < 300:
                    emit(CrawlLogEntry(url=url, depth=depth, outcome=ERROR,
                                       status=result.status, duration_ms=duration,
                                       message=f"status {result.status}"))
                    continue
                page = FetchedPage(
                    url=url,
                    depth=depth,
                    status=result.status,
                    content_type=result.content_type,
                    body=result.body,
                    fetched_at=timeutil.isoformat(timeutil.now()),
                )
                fetched_count += 1
                emit(CrawlLogEntry(url=url, depth=depth, outcome=FETCHED,
                                   status=result.status, duration_ms=duration))
                yield page
                if depth < config.max_depth and _is_markup(result.content_type):
                    for link in extract_links(page):
                        admit(link, depth + 1)
