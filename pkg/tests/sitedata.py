"""The three-page fixture site used across crawler, wrapper, and pipeline tests."""

import threading
from contextlib import contextmanager
from functools import partial
from http.server import SimpleHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import urlsplit

from crisisbot.crawler import CrawlConfig, FetchResult, FetchedPage

SITE_DIR = Path(__file__).parent / "fixtures" / "site"

HOST = "www.who.int"
INDEX_URL = "http://www.who.int/mediacentre/en/"
PR25_URL = "http://www.who.int/mediacentre/releases/2004/pr25/en/"
WNV_URL = "http://www.who.int/mediacentre/releases/2004/wnv/en/"

PAGE_FILES = {
    INDEX_URL: "index.html",
    PR25_URL: "pr25.html",
    WNV_URL: "wnv.html",
}

PR25_TITLE = "New meningitis threat being contained by web of partnerships"
PR25_CONTENT = (
    "A rare strain of meningitis, which re-emerged recently in Burkina Faso..."
)


def page_body(url: str) -> str:
    return (SITE_DIR / PAGE_FILES[url]).read_text(encoding="utf-8")


def fetched_page(url: str, depth: int = 0) -> FetchedPage:
    return FetchedPage(
        url=url,
        depth=depth,
        status=200,
        content_type="text/html; charset=utf-8",
        body=page_body(url),
        fetched_at="2004-04-08T12:00:00+00:00",
    )


def site_fetcher(url: str, timeout_ms: int) -> FetchResult:
    if url not in PAGE_FILES:
        return FetchResult(404, "text/html", "not found")
    return FetchResult(200, "text/html; charset=utf-8", page_body(url))


def site_config(**overrides) -> CrawlConfig:
    base = dict(
        roots=(INDEX_URL,),
        allowed_hosts=frozenset({HOST}),
        max_depth=1,
        max_pages=20,
        fetch_delay_ms=0,
        timeout_ms=1000,
    )
    base.update(overrides)
    return CrawlConfig(**base)


def make_docroot(root: Path) -> None:
    """Lay the fixture pages out as directory indexes under their URL paths."""
    for url in PAGE_FILES:
        target = root / urlsplit(url).path.lstrip("/") / "index.html"
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(page_body(url), encoding="utf-8")


class _QuietHandler(SimpleHTTPRequestHandler):
    def log_message(self, *args) -> None:
        pass


@contextmanager
def serve_docroot(docroot: Path):
    """Serve a directory over HTTP on an ephemeral port; yields the base URL."""
    handler = partial(_QuietHandler, directory=str(docroot))
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield f"http://127.0.0.1:{server.server_address[1]}"
    finally:
        server.shutdown()
        thread.join()


def local_config_dict(base_url: str, **overrides) -> dict:
    """Crawl config for the fixture site served at base_url, as plain JSON data."""
    config = {
        "roots": [f"{base_url}/mediacentre/en/"],
        "allowed_hosts": ["127.0.0.1"],
        "max_depth": 1,
        "max_pages": 20,
        "fetch_delay_ms": 0,
        "timeout_ms": 5000,
    }
    config.update(overrides)
    return config
