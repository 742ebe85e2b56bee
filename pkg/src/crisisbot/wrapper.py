"""Cleans raw hypertext news pages into structured records.

The main article body is taken to be the largest contiguous run of
paragraph elements (measured by text length) outside navigation, header,
footer, script, and style regions.  A leading dateline such as
"8 APRIL 2004 | GENEVA -- " is recognized by its date-then-dash shape and
removed from the content, matching how wire-service copy opens.
"""

from __future__ import annotations

import datetime as dt
import logging
import re
from dataclasses import dataclass
from html.parser import HTMLParser

from .crawler import FetchedPage
from .text import find_dates, find_first_date

logger = logging.getLogger(__name__)

_SPACE = re.compile(r"\s+")
_RESIDUAL_TAG = re.compile(r"<[A-Za-z]")
_DATELINE_TAIL = re.compile(r"\s*(?:\|[^|]{0,60}?)?\s*(?:-{2,}|–|—)\s*")

_SUPPRESSED = {"script", "style", "noscript", "template", "head"}
_BOILERPLATE = {"nav", "footer", "header", "aside", "form", "menu"}
_HEADINGS = {"h1", "h2", "h3", "h4", "h5", "h6"}
_INLINE = {
    "a", "abbr", "b", "bdi", "bdo", "br", "cite", "code", "data", "dfn",
    "em", "font", "i", "img", "kbd", "mark", "q", "s", "samp", "small",
    "span", "strong", "sub", "sup", "time", "tt", "u", "var", "wbr",
}


class CleaningFailed(Exception):
    """The page does not yield a usable news record."""

    def __init__(self, url: str, reason: str):
        super().__init__(f"{url}: {reason}")
        self.url = url
        self.reason = reason


def _collapse(text: str) -> str:
    return _SPACE.sub(" ", text).strip()


@dataclass(frozen=True)
class CleanedNews:
    """One news article: title, source URL, publication date, plain text.

    Paragraphs in content are separated by single blank lines.  When no
    date was found on the page, date falls back to the fetch date and
    date_guessed is set.
    """

    title: str
    url: str
    date: dt.date
    content: str
    date_guessed: bool = False

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError("title must be non-empty")
        if not self.content.strip():
            raise ValueError("content must be non-empty")
        if _RESIDUAL_TAG.search(self.content):
            raise ValueError("content still contains markup")


class _TextCollector(HTMLParser):
    """Flattens markup to text, dropping script and style contents."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._silent = 0

    def handle_starttag(self, tag, attrs):
        if tag in ("script", "style"):
            self._silent += 1

    def handle_endtag(self, tag):
        if tag in ("script", "style") and self._silent:
            self._silent -= 1

    def handle_data(self, data):
        if not self._silent:
            self.parts.append(data)


def strip_markup(fragment: str) -> str:
    """Markup in, collapsed plain text out; never raises."""
    collector = _TextCollector()
    try:
        collector.feed(fragment)
        collector.close()
    except Exception as err:
        logger.warning("markup stripping fell back to raw text: %s", err)
        return _collapse(fragment)
    return _collapse("".join(collector.parts))


class _PageScan(HTMLParser):
    """One streaming pass: title, headings, paragraph runs, body text.

    Paragraphs are grouped into contiguous runs; any block-level element
    between two paragraphs ends the current run, inline elements do not.
    """

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.title_parts: list[str] = []
        self.headings: list[str] = []
        self.runs: list[list[str]] = []
        self.body_parts: list[str] = []
        self._run: list[str] = []
        self._paragraph: list[str] | None = None
        self._heading: list[str] | None = None
        self._suppress = 0
        self._in_title = False

    def handle_starttag(self, tag, attrs):
        if tag in _SUPPRESSED or tag in _BOILERPLATE:
            self._suppress += 1
            self._break_run()
            return
        if tag == "title":
            self._in_title = True
            return
        if self._suppress:
            return
        if tag == "p":
            self._end_paragraph()
            self._block_boundary()
            self._paragraph = []
        elif tag in _HEADINGS:
            self._break_run()
            self._heading = []
        elif tag not in _INLINE:
            self._break_run()

    def handle_endtag(self, tag):
        if tag in _SUPPRESSED or tag in _BOILERPLATE:
            if self._suppress:
                self._suppress -= 1
            return
        if tag == "title":
            self._in_title = False
            return
        if self._suppress:
            return
        if tag == "p":
            self._end_paragraph()
            self._block_boundary()
        elif tag in _HEADINGS:
            if self._heading is not None:
                text = _collapse("".join(self._heading))
                if text:
                    self.headings.append(text)
                self._heading = None
            self._block_boundary()
        elif tag not in _INLINE:
            self._break_run()

    def _block_boundary(self):
        # keeps words from different block elements apart in the body text
        self.body_parts.append("\n")

    def handle_data(self, data):
        if self._in_title:
            self.title_parts.append(data)
            return
        if self._suppress:
            return
        self.body_parts.append(data)
        if self._heading is not None:
            self._heading.append(data)
        if self._paragraph is not None:
            self._paragraph.append(data)

    def _end_paragraph(self):
        if self._paragraph is not None:
            text = _collapse("".join(self._paragraph))
            if text:
                self._run.append(text)
            self._paragraph = None

    def _break_run(self):
        self._end_paragraph()
        self._block_boundary()
        if self._run:
            self.runs.append(self._run)
            self._run = []

    def finish(self):
        self._break_run()


def _strip_dateline(paragraph: str) -> str:
    """Remove a leading "<date> | <place> -- " style prefix, if present."""
    found = find_dates(paragraph[:80])
    if not found or found[0][0][0] != 0:
        return paragraph
    date_end = found[0][0][1]
    tail = _DATELINE_TAIL.match(paragraph, date_end)
    if tail is None or tail.end() == date_end:
        return paragraph
    rest = paragraph[tail.end():]
    return rest if rest else paragraph


def clean(page: FetchedPage) -> CleanedNews:
    """Extract title, date, and article text from a fetched page.

    Raises CleaningFailed when no title can be found or no paragraph text
    survives; a missing date falls back to the fetch date (flagged).
    """
    scan = _PageScan()
    try:
        scan.feed(page.body)
        scan.close()
    except Exception as err:
        raise CleaningFailed(page.url, f"unparseable page: {err}") from err
    scan.finish()

    title = _collapse("".join(scan.title_parts))
    if not title and scan.headings:
        title = scan.headings[0]
    if not title:
        raise CleaningFailed(page.url, "no title or heading")

    runs = scan.runs
    if not runs:
        raise CleaningFailed(page.url, "no paragraph text")
    main = max(runs, key=lambda run: sum(len(p) for p in run))
    paragraphs = list(main)
    paragraphs[0] = _strip_dateline(paragraphs[0])
    paragraphs = [p for p in paragraphs if p]
    if not paragraphs:
        raise CleaningFailed(page.url, "no paragraph text")

    body_text = _collapse("".join(scan.body_parts))
    date = find_first_date(body_text)
    date_guessed = date is None
    if date is None:
        date = dt.datetime.fromisoformat(page.fetched_at).date()

    try:
        return CleanedNews(
            title=title,
            url=page.url,
            date=date,
            content="\n\n".join(paragraphs),
            date_guessed=date_guessed,
        )
    except ValueError as err:
        raise CleaningFailed(page.url, str(err)) from err
