"""Entity annotation: noun-phrase chunking, weighted gazetteer, ontology tags.

The chunker is a rule table, not a parser: runs of determiners, listed
adjectives, dictionary nouns, and capitalized words form candidate noun
phrases.  Gazetteer surfaces are matched case-insensitively on whole words
inside those phrases; overlapping candidates are resolved by weight, then
length, then leftmost, so among equal weights the longest surface wins.
Dates are tagged by pattern, since no list could enumerate them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources

from .text import find_dates, split_sentences, word_spans
from .wrapper import CleanedNews

DATE_WEIGHT = 1.0

_DET = "det"
_ADJ = "adj"
_NOUN = "noun"
_CAP = "cap"

_PRONOUN_TAGS = {
    "it": ("disease", "organization"),
    "he": ("person",),
    "she": ("person",),
    "they": ("organization",),
}


class Ontology:
    """Tag tree rooted at "entity", with question forms per tag.

    Every tag carries its "what <tag>" form; location tags answer "where",
    agent tags answer "who", and date answers "when".
    """

    def __init__(self, parents: dict[str, str | None], wh: dict[str, tuple[str, ...]]):
        self._parents = dict(parents)
        self._wh = {tag: tuple(forms) for tag, forms in wh.items()}
        self._validate()

    @classmethod
    def from_dict(cls, root: dict) -> "Ontology":
        parents: dict[str, str | None] = {}
        wh: dict[str, tuple[str, ...]] = {}

        def walk(node: dict, parent: str | None) -> None:
            tag = node.get("tag")
            if not tag or not isinstance(tag, str):
                raise ValueError("ontology node without a tag")
            if tag in parents:
                raise ValueError(f"duplicate ontology tag: {tag}")
            parents[tag] = parent
            wh[tag] = tuple(node.get("wh", ()))
            for child in node.get("children", ()):
                walk(child, tag)

        walk(root, None)
        return cls(parents, wh)

    @classmethod
    def from_file(cls, path) -> "Ontology":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def _validate(self) -> None:
        roots = [tag for tag, parent in self._parents.items() if parent is None]
        if roots != ["entity"]:
            raise ValueError("ontology must have the single root tag 'entity'")
        for tag, forms in self._wh.items():
            if not forms:
                raise ValueError(f"tag {tag} has no question forms")
            if f"what {tag}" not in forms:
                raise ValueError(f"tag {tag} is missing its 'what {tag}' form")
        for tag in self.tags:
            if self.is_a(tag, "location") and "where" not in self._wh[tag]:
                raise ValueError(f"location tag {tag} must answer 'where'")
            if self.is_a(tag, "agent") and "who" not in self._wh[tag]:
                raise ValueError(f"agent tag {tag} must answer 'who'")
        if "date" in self._parents and "when" not in self._wh["date"]:
            raise ValueError("date must answer 'when'")

    @property
    def tags(self) -> frozenset[str]:
        return frozenset(self._parents)

    def has(self, tag: str) -> bool:
        return tag in self._parents

    def wh_tokens(self, tag: str) -> tuple[str, ...]:
        return self._wh[tag]

    def is_a(self, tag: str, ancestor: str) -> bool:
        """True when tag equals ancestor or sits below it in the tree."""
        current: str | None = tag
        while current is not None:
            if current == ancestor:
                return True
            current = self._parents.get(current)
        return False


@dataclass(frozen=True)
class GazetteerEntry:
    surface: str
    tag: str
    weight: float

    def __post_init__(self):
        if not self.surface.strip():
            raise ValueError("gazetteer surface must be non-empty")
        if self.weight <= 0:
            raise ValueError(f"weight must be positive: {self.surface!r}")


class Gazetteer:
    """Surface → tag lookup with longest-first candidates per first word.

    Entries sharing one normalized surface collapse to the highest weight
    (ties to the alphabetically first tag), so file order never matters.
    """

    def __init__(self, entries, ontology: Ontology):
        best: dict[tuple[str, ...], GazetteerEntry] = {}
        for entry in entries:
            if not ontology.has(entry.tag):
                raise ValueError(f"unknown ontology tag {entry.tag!r} for {entry.surface!r}")
            tokens = tuple(entry.surface.lower().split())
            if not tokens:
                raise ValueError("gazetteer surface must contain a word")
            kept = best.get(tokens)
            if kept is None or entry.weight > kept.weight or (
                entry.weight == kept.weight and entry.tag < kept.tag
            ):
                best[tokens] = entry
        self._by_first: dict[str, list[tuple[tuple[str, ...], GazetteerEntry]]] = {}
        for tokens, entry in best.items():
            self._by_first.setdefault(tokens[0], []).append((tokens, entry))
        for candidates in self._by_first.values():
            candidates.sort(key=lambda item: (-len(item[0]), item[0]))
        self._count = len(best)

    def __len__(self) -> int:
        return self._count

    def candidates(self, first_word: str) -> list[tuple[tuple[str, ...], GazetteerEntry]]:
        """(tokens, entry) pairs starting with first_word, longest first."""
        return self._by_first.get(first_word, [])

    @classmethod
    def from_file(cls, path, ontology: Ontology) -> "Gazetteer":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for number, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = stripped.split("\t")
                if len(fields) != 3:
                    raise ValueError(f"{path}:{number}: expected surface<TAB>tag<TAB>weight")
                surface, tag, raw_weight = fields
                try:
                    weight = float(raw_weight)
                except ValueError as err:
                    raise ValueError(f"{path}:{number}: bad weight {raw_weight!r}") from err
                entries.append(GazetteerEntry(surface.strip(), tag.strip(), weight))
        return cls(entries, ontology)


@dataclass(frozen=True)
class NamedEntity:
    surface: str
    tag: str
    span: tuple[int, int]
    weight: float

    def __post_init__(self):
        if not self.surface:
            raise ValueError("entity surface must be non-empty")
        if not (0 <= self.span[0] < self.span[1]):
            raise ValueError(f"bad entity span: {self.span}")

    @property
    def rendered(self) -> str:
        return f"{self.surface}[{self.tag}]"


@dataclass(frozen=True)
class AnnotatedNews:
    news: CleanedNews
    entities: tuple[NamedEntity, ...]

    def __post_init__(self):
        previous_end = 0
        for entity in self.entities:
            a, b = entity.span
            if a < previous_end:
                raise ValueError("entity spans must be sorted and disjoint")
            if b > len(self.news.content):
                raise ValueError("entity span out of bounds")
            if self.news.content[a:b] != entity.surface:
                raise ValueError(f"surface mismatch at {entity.span}")
            previous_end = b

    @property
    def rendered_entities(self) -> str:
        return " ".join(entity.rendered for entity in self.entities)


@dataclass(frozen=True)
class ChunkerLexicon:
    determiners: frozenset[str]
    adjectives: frozenset[str]
    nouns: frozenset[str]
    function_words: frozenset[str]

    @classmethod
    def from_dict(cls, raw: dict) -> "ChunkerLexicon":
        return cls(
            determiners=frozenset(raw.get("determiners", ())),
            adjectives=frozenset(raw.get("adjectives", ())),
            nouns=frozenset(raw.get("nouns", ())),
            function_words=frozenset(raw.get("function_words", ())),
        )

    @classmethod
    def from_file(cls, path) -> "ChunkerLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def classify(self, token: str) -> str | None:
        lower = token.lower()
        if lower in self.determiners:
            return _DET
        if lower in self.adjectives:
            return _ADJ
        if lower in self.nouns:
            return _NOUN
        if token[:1].isupper() and lower not in self.function_words:
            return _CAP
        return None


def chunk_noun_phrases(content: str, lexicon: ChunkerLexicon | None = None) -> list[tuple[int, int]]:
    """Candidate noun-phrase character spans, ordered and disjoint.

    A phrase is a maximal run of determiner/adjective/noun/capitalized
    words, trimmed of trailing non-nouns; it must keep at least one noun
    or capitalized word.
    """
    lexicon = lexicon or default_chunker_lexicon()
    spans: list[tuple[int, int]] = []
    run: list[tuple[tuple[int, int], str]] = []

    def flush() -> None:
        while run and run[-1][1] in (_DET, _ADJ):
            run.pop()
        if any(kind in (_NOUN, _CAP) for _, kind in run):
            spans.append((run[0][0][0], run[-1][0][1]))
        run.clear()

    for span in word_spans(content):
        kind = lexicon.classify(content[span[0]:span[1]])
        if kind is None:
            flush()
        else:
            run.append((span, kind))
    flush()
    return spans


def _overlaps(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def _resolve_overlaps(candidates: list[NamedEntity]) -> list[NamedEntity]:
    """Keep a disjoint subset, preferring weight, then length, then leftmost."""
    chosen: list[NamedEntity] = []
    ranked = sorted(
        candidates,
        key=lambda e: (-e.weight, e.span[0] - e.span[1], e.span[0], e.tag),
    )
    for entity in ranked:
        if all(not _overlaps(entity.span, kept.span) for kept in chosen):
            chosen.append(entity)
    chosen.sort(key=lambda e: e.span)
    return chosen


def tag_entities(
    phrase_spans: list[tuple[int, int]],
    content: str,
    gazetteer: Gazetteer,
    ontology: Ontology,
) -> list[NamedEntity]:
    """Gazetteer entities inside the given phrase spans, disjoint and sorted."""
    words = word_spans(content)
    candidates: list[NamedEntity] = []
    for pa, pb in phrase_spans:
        inside = [w for w in words if pa <= w[0] and w[1] <= pb]
        lowered = [content[a:b].lower() for a, b in inside]
        for i in range(len(inside)):
            for tokens, entry in gazetteer.candidates(lowered[i]):
                k = len(tokens)
                if i + k <= len(inside) and tuple(lowered[i:i + k]) == tokens:
                    if not ontology.has(entry.tag):
                        continue
                    span = (inside[i][0], inside[i + k - 1][1])
                    candidates.append(NamedEntity(
                        surface=content[span[0]:span[1]],
                        tag=entry.tag,
                        span=span,
                        weight=entry.weight,
                    ))
    return _resolve_overlaps(candidates)


def date_entities(content: str) -> list[NamedEntity]:
    """Date expressions in content as date-tagged entities."""
    return [
        NamedEntity(surface=content[a:b], tag="date", span=(a, b), weight=DATE_WEIGHT)
        for (a, b), _ in find_dates(content)
    ]


def resolve_pronouns(content: str, entities: list[NamedEntity]) -> str:
    """Substitute sentence-initial it/he/she/they with the single compatible
    entity of the previous sentence, when there is exactly one."""
    sentence_spans = split_sentences(content)
    if len(sentence_spans) < 2:
        return content
    words = word_spans(content)
    replacements: list[tuple[int, int, str]] = []
    for k in range(1, len(sentence_spans)):
        sa, sb = sentence_spans[k]
        first = next((w for w in words if sa <= w[0] and w[1] <= sb), None)
        if first is None:
            continue
        token = content[first[0]:first[1]].lower()
        compatible = _PRONOUN_TAGS.get(token)
        if compatible is None:
            continue
        pa, pb = sentence_spans[k - 1]
        previous = [
            e for e in entities
            if pa <= e.span[0] < pb and e.tag in compatible
        ]
        if len(previous) == 1:
            replacements.append((first[0], first[1], previous[0].surface))
    for a, b, surface in reversed(replacements):
        content = content[:a] + surface + content[b:]
    return content


def annotate(
    news: CleanedNews,
    gazetteer: Gazetteer | None = None,
    ontology: Ontology | None = None,
    lexicon: ChunkerLexicon | None = None,
) -> AnnotatedNews:
    """Chunk, tag, resolve pronouns, and re-tag one cleaned record."""
    ontology = ontology or default_ontology()
    gazetteer = gazetteer or default_gazetteer()
    lexicon = lexicon or default_chunker_lexicon()

    def entities_in(content: str) -> list[NamedEntity]:
        phrase_spans = chunk_noun_phrases(content, lexicon)
        found = tag_entities(phrase_spans, content, gazetteer, ontology)
        return _resolve_overlaps(found + date_entities(content))

    entities = entities_in(news.content)
    resolved = resolve_pronouns(news.content, entities)
    if resolved != news.content:
        news = replace(news, content=resolved)
        entities = entities_in(resolved)
    return AnnotatedNews(news=news, entities=tuple(entities))


def _data_path(name: str):
    return resources.files("crisisbot.data").joinpath(name)


@lru_cache(maxsize=1)
def default_ontology() -> Ontology:
    with _data_path("ontology.json").open(encoding="utf-8") as fh:
        return Ontology.from_dict(json.load(fh))


@lru_cache(maxsize=1)
def default_gazetteer() -> Gazetteer:
    return Gazetteer.from_file(_data_path("gazetteer.tsv"), default_ontology())


@lru_cache(maxsize=1)
def default_chunker_lexicon() -> ChunkerLexicon:
    with _data_path("chunker_lexicon.json").open(encoding="utf-8") as fh:
        return ChunkerLexicon.from_dict(json.load(fh))
