"""Turn stored news records into question-answering categories.

A template bank holds pattern/template skeletons in the same markup the
knowledge base uses, with bracketed placeholder slots.  Instantiating a
skeleton against a news record substitutes a wh-form for ``[wh-token]``,
the record's disease surface for ``[disease]``, a two-sentence excerpt
for ``[excerpt]``, and the article URL for ``[url]``.  One category is
emitted per wh-form of each non-disease entity; a record whose only
entities are diseases falls back to the disease tag's own wh-forms.
"""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable

from .aiml import (
    _WINDOW_OPEN,
    WILDCARD,
    Category,
    ExpressionCue,
    KnowledgeBase,
    Pattern,
    TemplateBody,
    UrlPush,
    normalize,
)
from .preprocess import Ontology, default_ontology
from .repository import NewsRecord
from .text import split_sentences

logger = logging.getLogger(__name__)

WH_SLOT = "[wh-token]"
DISEASE_SLOT = "[disease]"
EXCERPT_SLOT = "[excerpt]"
URL_SLOT = "[url]"

DISEASE_TAG = "disease"

_SPACE = re.compile(r"\s+")


class TemplateBankError(ValueError):
    """Malformed template bank markup or skeleton."""


class ConversionSkipped(Exception):
    """A record could not be converted; carries the record id and why."""

    def __init__(self, record_id: str, reason: str):
        super().__init__(f"{record_id}: {reason}")
        self.record_id = record_id
        self.reason = reason


@dataclass(frozen=True)
class UrlSlot:
    """Placeholder for the article-opening push inside a skeleton."""

    url_template: str

    def __post_init__(self):
        if self.url_template.count(URL_SLOT) != 1:
            raise ValueError(f"push slot must contain {URL_SLOT} exactly once")


@dataclass(frozen=True)
class TemplateSpec:
    """One named skeleton pair from the template bank.

    The pattern skeleton is a token sequence mixing literals, wildcards,
    and the WH/DISEASE slots; the template skeleton is ordered parts
    (text, expression cues, one UrlSlot) carrying the EXCERPT and URL
    slots.  Each slot appears exactly once.
    """

    name: str
    pattern_skeleton: tuple[str, ...]
    template_skeleton: tuple[object, ...]

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("template name must be non-empty")
        self._check_pattern()
        self._check_template()

    def _check_pattern(self) -> None:
        if not self.pattern_skeleton:
            raise ValueError(f"{self.name}: empty pattern skeleton")
        previous = None
        for token in self.pattern_skeleton:
            if token == WILDCARD:
                if previous == WILDCARD:
                    raise ValueError(f"{self.name}: adjacent wildcards")
            elif token not in (WH_SLOT, DISEASE_SLOT):
                if normalize(token) != [token]:
                    raise ValueError(f"{self.name}: not a literal token: {token!r}")
            previous = token
        for slot in (WH_SLOT, DISEASE_SLOT):
            if self.pattern_skeleton.count(slot) != 1:
                raise ValueError(f"{self.name}: pattern needs {slot} exactly once")

    def _check_template(self) -> None:
        texts = [p for p in self.template_skeleton if isinstance(p, str)]
        slots = [p for p in self.template_skeleton if isinstance(p, UrlSlot)]
        rest = [
            p
            for p in self.template_skeleton
            if not isinstance(p, (str, UrlSlot, ExpressionCue))
        ]
        if rest:
            raise ValueError(f"{self.name}: unsupported template part {rest[0]!r}")
        if sum(t.count(EXCERPT_SLOT) for t in texts) != 1:
            raise ValueError(f"{self.name}: template needs {EXCERPT_SLOT} exactly once")
        if len(slots) != 1 or any(URL_SLOT in t for t in texts):
            raise ValueError(
                f"{self.name}: template needs one push slot carrying {URL_SLOT}"
            )


@dataclass(frozen=True)
class TemplateBank:
    """The full set of skeletons, in file order."""

    templates: tuple[TemplateSpec, ...]

    def __post_init__(self):
        if not self.templates:
            raise ValueError("template bank must not be empty")
        names = [spec.name for spec in self.templates]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate template names: {sorted(names)}")

    @classmethod
    def from_string(cls, document: str) -> "TemplateBank":
        try:
            root = ET.fromstring(document)
        except ET.ParseError as exc:
            raise TemplateBankError(f"bank is not well-formed XML: {exc}") from None
        if root.tag != "templates":
            raise TemplateBankError(f"expected <templates> root, got <{root.tag}>")
        specs = []
        for elem in root:
            if elem.tag != "category":
                raise TemplateBankError(f"unexpected element <{elem.tag}> in bank")
            try:
                specs.append(_parse_spec(elem))
            except ValueError as exc:
                raise TemplateBankError(str(exc)) from None
        try:
            return cls(tuple(specs))
        except ValueError as exc:
            raise TemplateBankError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "TemplateBank":
        with open(path, encoding="utf-8") as handle:
            return cls.from_string(handle.read())


def _parse_spec(elem: ET.Element) -> TemplateSpec:
    name = (elem.get("name") or "").strip()
    if not name:
        raise ValueError("bank category needs a name attribute")
    pattern_el = elem.find("pattern")
    template_el = elem.find("template")
    if pattern_el is None or template_el is None:
        raise ValueError(f"{name}: category needs <pattern> and <template>")
    tokens = []
    for piece in (pattern_el.text or "").split():
        if piece in (WILDCARD, WH_SLOT, DISEASE_SLOT):
            tokens.append(piece)
        else:
            words = normalize(piece)
            if not words:
                raise ValueError(f"{name}: unusable pattern token {piece!r}")
            tokens.extend(words)
    parts: list[object] = []
    _append(parts, template_el.text)
    for child in template_el:
        if child.tag == "agplay":
            parts.append(ExpressionCue.parse(child.get("anims", "")))
        elif child.tag == "javascript":
            m = _WINDOW_OPEN.match(child.text or "")
            if not m:
                raise ValueError(f"{name}: push slot must be a window.open call")
            parts.append(UrlSlot(m.group("url")))
        else:
            raise ValueError(f"{name}: unsupported template element <{child.tag}>")
        _append(parts, child.tail)
    return TemplateSpec(name, tuple(tokens), tuple(parts))


def _append(parts: list[object], raw: str | None) -> None:
    text = _SPACE.sub(" ", raw).strip() if raw else ""
    if not text:
        return
    if parts and isinstance(parts[-1], str):
        parts[-1] = f"{parts[-1]} {text}"
    else:
        parts.append(text)


@lru_cache(maxsize=None)
def default_bank() -> TemplateBank:
    source = resources.files("crisisbot.data").joinpath("templates.aiml")
    return TemplateBank.from_string(source.read_text(encoding="utf-8"))


def resolve_wh(tag: str, ontology: Ontology | None = None) -> tuple[str, ...]:
    """Interrogative forms for an ontology tag, most specific question last."""
    onto = ontology if ontology is not None else default_ontology()
    return onto.wh_tokens(tag)


def excerpt(content: str) -> str:
    """First two sentences of the content, "..." appended when it goes on."""
    spans = split_sentences(content)
    if len(spans) <= 2:
        return _SPACE.sub(" ", content).strip()
    head = _SPACE.sub(" ", content[: spans[1][1]]).strip()
    return head.rstrip(".") + "..."


def instantiate(
    spec: TemplateSpec, record: NewsRecord, ontology: Ontology | None = None
) -> list[Category]:
    """All categories one skeleton yields for one record.

    Emits one category per wh-form of each non-disease entity; when the
    record holds nothing but disease entities, falls back to the disease
    tag's own forms.  The highest-weight disease fills the DISEASE slot
    (leftmost on ties).
    """
    onto = ontology if ontology is not None else default_ontology()
    diseases = [e for e in record.entities if e.tag == DISEASE_TAG]
    if not diseases:
        raise ConversionSkipped(record.id, "no disease entity")
    disease = max(diseases, key=lambda e: (e.weight, -e.span[0]))
    disease_tokens = tuple(normalize(disease.surface))
    if not disease_tokens:
        raise ConversionSkipped(record.id, f"unusable disease surface {disease.surface!r}")
    others = [e for e in record.entities if e.tag != DISEASE_TAG]
    if others:
        forms = [form for e in others for form in resolve_wh(e.tag, onto)]
    else:
        forms = list(resolve_wh(DISEASE_TAG, onto))
    body = _fill_template(spec, record)
    categories = []
    for form in forms:
        elements: list[str] = []
        for token in spec.pattern_skeleton:
            if token == WH_SLOT:
                elements.extend(normalize(form))
            elif token == DISEASE_SLOT:
                elements.extend(disease_tokens)
            else:
                elements.append(token)
        pattern = Pattern(tuple(elements))
        categories.append(Category(pattern, body, source_id=record.id))
    return categories


def _fill_template(spec: TemplateSpec, record: NewsRecord) -> TemplateBody:
    answer = excerpt(record.content)
    parts: list[object] = []
    for part in spec.template_skeleton:
        if isinstance(part, str):
            parts.append(part.replace(EXCERPT_SLOT, answer))
        elif isinstance(part, UrlSlot):
            parts.append(UrlPush(part.url_template.replace(URL_SLOT, record.url)))
        else:
            parts.append(part)
    return TemplateBody(tuple(parts))


def convert_all(
    records: Iterable[NewsRecord],
    bank: TemplateBank | None = None,
    ontology: Ontology | None = None,
) -> list[Category]:
    """Categories for every record, newest news first, bank order within.

    Records that cannot be converted are logged and skipped; conversion
    continues with the rest.
    """
    bank = bank if bank is not None else default_bank()
    onto = ontology if ontology is not None else default_ontology()
    ordered = sorted(records, key=lambda r: r.date, reverse=True)
    out: list[Category] = []
    for record in ordered:
        try:
            for spec in bank.templates:
                out.extend(instantiate(spec, record, onto))
        except ConversionSkipped as skip:
            logger.info("skipping %s: %s", skip.record_id, skip.reason)
    return out


def populate(kb: KnowledgeBase, categories: Iterable[Category]) -> int:
    """Insert categories in order (duplicates replace) and count them."""
    return kb.add_all(categories)
