"""AIML-style knowledge base: category parsing, pattern matching, rendering.

The knowledge file format is XML with an <aiml> root holding <category>
elements, each pairing a question <pattern> with an answer <template>.
Two extension elements appear inside templates: <agplay anims="..."/>
carries facial-expression cues, and a <javascript> element whose body is a
single window.open("...", "", ""); call pushes that URL to the client.
Scripts are never executed; the URL is extracted and everything else is
kept as inert text.
"""

from __future__ import annotations

import logging
import re
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from urllib.parse import urlsplit
from xml.sax.saxutils import escape, quoteattr

logger = logging.getLogger(__name__)

WILDCARD = "_"

DEFAULT_FALLBACK_TEXT = "I don't have information on that yet."

_TOKEN = re.compile(r"[^\W_]+(?:['-][^\W_]+)*", re.UNICODE)
_ANIM_NAME = re.compile(r"^[a-z][a-z0-9_]*$")
_WINDOW_OPEN = re.compile(
    r'^\s*window\.open\(\s*"(?P<url>[^"]+)"\s*(?:,\s*"[^"]*"\s*)*\)\s*;?\s*$'
)
_SPACE = re.compile(r"\s+")


def normalize(raw: str) -> list[str]:
    """Lowercase, strip punctuation, and split into tokens.

    Hyphens and apostrophes survive inside a word ("re-emerge", "don't");
    everything else separates tokens.  Idempotent: normalizing the joined
    output changes nothing.  All-punctuation input yields an empty list.
    """
    return _TOKEN.findall(raw.lower())


def _is_token(word: str) -> bool:
    return bool(word) and normalize(word) == [word]


@dataclass(frozen=True)
class Pattern:
    """An ordered mix of literal tokens and `_` wildcards.

    A wildcard matches zero or more query tokens.  Adjacent wildcards are
    collapsed at parse time and rejected on direct construction.
    """

    elements: tuple[str, ...]

    def __post_init__(self):
        if not self.elements:
            raise ValueError("pattern needs at least one element")
        previous = None
        for el in self.elements:
            if el == WILDCARD:
                if previous == WILDCARD:
                    raise ValueError("adjacent wildcards are not allowed")
            elif not _is_token(el):
                raise ValueError(f"not a normalized token: {el!r}")
            previous = el

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        elements: list[str] = []
        for piece in text.split():
            if piece == WILDCARD:
                if not elements or elements[-1] != WILDCARD:
                    elements.append(WILDCARD)
            else:
                elements.extend(normalize(piece))
        return cls(tuple(elements))

    @property
    def literal_count(self) -> int:
        return sum(1 for el in self.elements if el != WILDCARD)

    @property
    def wildcard_count(self) -> int:
        return sum(1 for el in self.elements if el == WILDCARD)

    def __str__(self) -> str:
        return " ".join(self.elements)


@dataclass(frozen=True)
class ExpressionCue:
    """Ordered animation names the client may play with a response."""

    anims: tuple[str, ...]

    def __post_init__(self):
        if not self.anims:
            raise ValueError("expression cue needs at least one animation name")
        for name in self.anims:
            if not _ANIM_NAME.match(name):
                raise ValueError(f"not a lowercase identifier: {name!r}")

    @classmethod
    def parse(cls, attr: str) -> "ExpressionCue":
        return cls(tuple(part.strip().lower() for part in attr.split(",") if part.strip()))

    def __str__(self) -> str:
        return ", ".join(self.anims)


@dataclass(frozen=True)
class UrlPush:
    """Directive to open a source article alongside the answer."""

    url: str

    def __post_init__(self):
        parts = urlsplit(self.url)
        if not parts.scheme or not parts.netloc:
            raise ValueError(f"push URL must be absolute: {self.url!r}")


@dataclass(frozen=True)
class TemplateBody:
    """Renderable answer: text parts plus optional cue and URL push.

    Parts are plain strings, ExpressionCue, or UrlPush values in document
    order; the concatenated text must be non-empty.
    """

    parts: tuple[object, ...]

    def __post_init__(self):
        if not self.text:
            raise ValueError("template must say something")

    @property
    def text(self) -> str:
        return " ".join(p for p in self.parts if isinstance(p, str)).strip()

    @property
    def cue(self) -> ExpressionCue | None:
        return next((p for p in self.parts if isinstance(p, ExpressionCue)), None)

    @property
    def push(self) -> UrlPush | None:
        return next((p for p in self.parts if isinstance(p, UrlPush)), None)


@dataclass(frozen=True)
class Category:
    """The basic knowledge unit: one pattern and its answer template."""

    pattern: Pattern
    body: TemplateBody
    source_id: str | None = None


@dataclass(frozen=True)
class MatchResult:
    category: Category
    bindings: tuple[tuple[str, ...], ...]
    specificity: int

    def __post_init__(self):
        if len(self.bindings) != self.category.pattern.wildcard_count:
            raise ValueError("one binding per wildcard")


@dataclass(frozen=True)
class Response:
    text: str
    cue: ExpressionCue | None = None
    push: UrlPush | None = None
    matched: bool = True

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("response text must be non-empty")


class KnowledgeParseError(ValueError):
    """Malformed knowledge markup; carries the failing line when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def _clean_text(raw: str | None) -> str:
    return _SPACE.sub(" ", raw).strip() if raw else ""


def _parse_push_script(body: str) -> UrlPush | None:
    m = _WINDOW_OPEN.match(body or "")
    if not m:
        return None
    try:
        return UrlPush(m.group("url"))
    except ValueError:
        return None


def _append_text(parts: list, text: str) -> None:
    if not text:
        return
    if parts and isinstance(parts[-1], str):
        parts[-1] = parts[-1] + " " + text
    else:
        parts.append(text)


def _parse_template(elem: ET.Element) -> TemplateBody:
    parts: list = []
    _append_text(parts, _clean_text(elem.text))
    for child in elem:
        if child.tag == "agplay":
            parts.append(ExpressionCue.parse(child.get("anims", "")))
        elif child.tag == "javascript":
            push = _parse_push_script(child.text or "")
            if push is not None:
                parts.append(push)
            else:
                # not a recognizable single window-open call: keep as text
                _append_text(parts, _clean_text(child.text))
        else:
            _append_text(parts, _clean_text(" ".join(child.itertext())))
        _append_text(parts, _clean_text(child.tail))
    return TemplateBody(tuple(parts))


def _parse_category(elem: ET.Element) -> Category:
    pattern_el = elem.find("pattern")
    template_el = elem.find("template")
    if pattern_el is None:
        raise ValueError("category has no <pattern>")
    if template_el is None:
        raise ValueError("category has no <template>")
    return Category(Pattern.parse(pattern_el.text or ""), _parse_template(template_el))


def parse_knowledge(document: str) -> list[Category]:
    """Parse an AIML document into categories.

    Individually broken categories are skipped with a logged diagnostic;
    the rest still load.  Malformed markup raises KnowledgeParseError.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as err:
        line = err.position[0] if err.position else None
        raise KnowledgeParseError(str(err), line) from err
    if root.tag != "aiml":
        raise KnowledgeParseError(f"expected <aiml> root, got <{root.tag}>")
    categories: list[Category] = []
    for idx, elem in enumerate(root.iter("category")):
        try:
            categories.append(_parse_category(elem))
        except ValueError as err:
            logger.warning("skipping category %d: %s", idx, err)
    return categories


def serialize_category(category: Category) -> str:
    lines = ["<category>", f"  <pattern>{escape(str(category.pattern))}</pattern>", "  <template>"]
    for part in category.body.parts:
        if isinstance(part, str):
            lines.append(f"    {escape(part)}")
        elif isinstance(part, ExpressionCue):
            lines.append(f"    <agplay anims={quoteattr(str(part))}/>")
        elif isinstance(part, UrlPush):
            lines.append(f'    <javascript>window.open("{escape(part.url)}", "", "");</javascript>')
    lines.extend(["  </template>", "</category>"])
    return "\n".join(lines)


def serialize_knowledge(categories: "list[Category] | tuple[Category, ...]") -> str:
    body = "\n".join(serialize_category(c) for c in categories)
    return f"<aiml>\n{body}\n</aiml>\n" if body else "<aiml>\n</aiml>\n"


def _match_elements(elements: tuple[str, ...], query: list[str]) -> tuple[tuple[str, ...], ...] | None:
    """Leftmost-shortest wildcard bindings for a full match, else None."""
    n, m = len(elements), len(query)
    dead: set[tuple[int, int]] = set()

    def go(ei: int, qi: int) -> list[tuple[str, ...]] | None:
        if (ei, qi) in dead:
            return None
        if ei == n:
            return [] if qi == m else None
        el = elements[ei]
        if el == WILDCARD:
            for take in range(m - qi + 1):
                rest = go(ei + 1, qi + take)
                if rest is not None:
                    return [tuple(query[qi:qi + take])] + rest
        elif qi < m and query[qi] == el:
            rest = go(ei + 1, qi + 1)
            if rest is not None:
                return rest
        dead.add((ei, qi))
        return None

    result = go(0, 0)
    return tuple(result) if result is not None else None


class KnowledgeBase:
    """Pattern-keyed category store with a first-element match index.

    Writers are serialized by an internal lock; categories themselves are
    immutable, so readers may hold results across writes.  Inserting a
    pattern that already exists replaces the old category (logged) while
    keeping its original precedence position, so re-running a conversion
    is idempotent.
    """

    def __init__(self, fallback_text: str = DEFAULT_FALLBACK_TEXT):
        self._categories: dict[tuple[str, ...], Category] = {}
        self._order: dict[tuple[str, ...], int] = {}
        self._index: dict[str, list[tuple[str, ...]]] = {}
        self._next_order = 0
        self._lock = threading.Lock()
        self.fallback = TemplateBody((fallback_text,))

    def __len__(self) -> int:
        return len(self._categories)

    def __iter__(self):
        return iter(list(self._categories.values()))

    def add(self, category: Category) -> bool:
        """Insert a category; returns True when it replaced an existing one."""
        key = category.pattern.elements
        with self._lock:
            replaced = key in self._categories
            if replaced:
                logger.info("replacing category for pattern %r", str(category.pattern))
            else:
                self._order[key] = self._next_order
                self._next_order += 1
                self._index.setdefault(key[0], []).append(key)
            self._categories[key] = category
        return replaced

    def add_all(self, categories) -> int:
        count = 0
        for category in categories:
            self.add(category)
            count += 1
        return count

    def candidates(self, first_token: str) -> list[Category]:
        """Categories whose pattern could match a query starting with first_token."""
        with self._lock:
            keys = list(self._index.get(first_token, [])) + list(self._index.get(WILDCARD, []))
            keys.sort(key=self._order.__getitem__)
            return [self._categories[k] for k in keys]

    def match(self, query: list[str]) -> MatchResult | None:
        """Best-matching category for a token query.

        Wildcards match zero or more tokens, literals match exactly.  The
        winner has the most literal tokens; ties fall to fewest
        wildcard-consumed tokens, then earliest insertion.  Deterministic.
        """
        if not query:
            raise ValueError("query must be non-empty")
        best: tuple[int, int, int] | None = None
        best_result: MatchResult | None = None
        for category in self.candidates(query[0]):
            bindings = _match_elements(category.pattern.elements, query)
            if bindings is None:
                continue
            consumed = sum(len(b) for b in bindings)
            rank = (-category.pattern.literal_count, consumed,
                    self._order[category.pattern.elements])
            if best is None or rank < best:
                best = rank
                best_result = MatchResult(category, bindings, category.pattern.literal_count)
        return best_result


def render(result: MatchResult | None, fallback: TemplateBody) -> Response:
    """Turn a match into a response; no match renders the fallback body."""
    body = result.category.body if result is not None else fallback
    return Response(text=body.text, cue=body.cue, push=body.push, matched=result is not None)


def load_knowledge_file(path) -> list[Category]:
    with open(path, encoding="utf-8") as fh:
        return parse_knowledge(fh.read())


@lru_cache(maxsize=1)
def default_greetings() -> tuple[Category, ...]:
    """Built-in small-talk categories: greetings, farewells, identity."""
    source = resources.files("crisisbot.data").joinpath("greetings.aiml")
    return tuple(parse_knowledge(source.read_text(encoding="utf-8")))
