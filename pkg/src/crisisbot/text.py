"""Plain-text scanning shared across the pipeline: sentences, dates, words."""

import re
from datetime import date

# Words end sentences only when they are not one of these (case-insensitive,
# matched without the trailing dot).  Covers titles, initials, and the latin
# abbreviations that show up in news copy.
_ABBREVIATIONS = {
    "dr", "mr", "mrs", "ms", "prof", "rev", "sr", "jr", "st",
    "vs", "etc", "al", "inc", "ltd", "co", "corp", "dept", "est",
    "e.g", "i.e", "eg", "ie", "cf", "no", "op", "approx",
    "u.s", "u.n", "u.k", "a.m", "p.m", "jan", "feb", "mar", "apr",
    "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "fig",
}

_SENTENCE_END = re.compile(r"[.!?]+")
_WORD = re.compile(r"[^\W_]+(?:['-][^\W_]+)*", re.UNICODE)

_MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5,
    "june": 6, "july": 7, "august": 8, "september": 9, "october": 10,
    "november": 11, "december": 12,
}
_MONTH_ALT = "|".join(_MONTHS)

# Accepted date shapes: "8 April 2004", "8 APRIL 2004", "April 8, 2004",
# ISO "2004-04-08".  First match in document order wins.
_DATE_PATTERNS = [
    re.compile(r"\b(?P<d>\d{1,2})\s+(?P<m>" + _MONTH_ALT + r")\s+(?P<y>\d{4})\b", re.IGNORECASE),
    re.compile(r"\b(?P<m>" + _MONTH_ALT + r")\s+(?P<d>\d{1,2}),?\s+(?P<y>\d{4})\b", re.IGNORECASE),
    re.compile(r"\b(?P<y>\d{4})-(?P<mn>\d{2})-(?P<d>\d{2})(?!\d)"),
]


def word_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of the words in text, in order."""
    return [m.span() for m in _WORD.finditer(text)]


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Character spans of sentences, boundaries at ./!/? runs.

    A single period is a boundary only when the preceding word is not a
    known abbreviation and what follows looks like a sentence start.  A dot
    run of two or more is an ellipsis: it ends a sentence only before an
    uppercase letter (so a trailing "..." stays inside its sentence).
    """
    spans: list[tuple[int, int]] = []
    start = 0
    for m in _SENTENCE_END.finditer(text):
        run = m.group()
        end = m.end()
        tail = text[end:]
        next_visible = tail.lstrip()
        if "." in run and len(run.replace(".", "")) == 0 and len(run) >= 2:
            # ellipsis
            if not (next_visible[:1].isupper()):
                continue
        elif run == ".":
            before = text[:m.start()]
            last = _WORD.findall(before[-24:])
            word = last[-1].lower() if last else ""
            if word in _ABBREVIATIONS or (len(word) == 1 and word.isalpha()):
                continue
            if next_visible and not (next_visible[0].isupper() or next_visible[0].isdigit() or next_visible[0] in "\"'"):
                continue
        if tail and not tail[0].isspace():
            continue
        segment = text[start:end]
        if segment.strip():
            spans.append((start, end))
        start = end
    rest = text[start:]
    if rest.strip():
        spans.append((start, len(text)))
    return spans


def sentences(text: str) -> list[str]:
    return [text[a:b].strip() for a, b in split_sentences(text)]


def _to_date(match: re.Match) -> date | None:
    groups = match.groupdict()
    try:
        month = int(groups["mn"]) if groups.get("mn") else _MONTHS[groups["m"].lower()]
        return date(int(groups["y"]), month, int(groups["d"]))
    except (KeyError, ValueError):
        return None


def find_dates(text: str) -> list[tuple[tuple[int, int], date]]:
    """All date expressions in text with their spans, in document order."""
    found: list[tuple[tuple[int, int], date]] = []
    taken: list[tuple[int, int]] = []
    for pattern in _DATE_PATTERNS:
        for m in pattern.finditer(text):
            parsed = _to_date(m)
            if parsed is None:
                continue
            span = m.span()
            if any(span[0] < b and a < span[1] for a, b in taken):
                continue
            taken.append(span)
            found.append((span, parsed))
    found.sort(key=lambda item: item[0])
    return found


def find_first_date(text: str) -> date | None:
    found = find_dates(text)
    return found[0][1] if found else None


def parse_date_string(raw: str) -> date | None:
    """Parse a string that is exactly one of the accepted date shapes."""
    stripped = raw.strip()
    found = find_dates(stripped)
    if len(found) == 1:
        (a, b), parsed = found[0]
        if stripped[a:b] == stripped:
            return parsed
    return None
