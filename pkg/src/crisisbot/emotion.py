"""Text-lexicon emotion classification for expression cues.

Maps emotion keywords in conversation text to animation cues: greeting
words raise a happy face, words about loss or death a sad one, obscenities
an angry one.  Used only when a matched category carries no explicit cue.
"""

from importlib import resources

from .aiml import ExpressionCue, normalize


class EmotionLexicon:
    """Keyword-to-cue table loaded from a `keyword<TAB>cue1,cue2` file."""

    def __init__(self, entries: list[tuple[tuple[str, ...], ExpressionCue]]):
        self._entries = {keyword: cue for keyword, cue in entries}
        self._max_len = max((len(k) for k in self._entries), default=0)

    @classmethod
    def loads(cls, content: str) -> "EmotionLexicon":
        entries = []
        for lineno, line in enumerate(content.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "\t" not in line:
                raise ValueError(f"line {lineno}: expected keyword<TAB>cues")
            keyword, cues = line.split("\t", 1)
            entries.append((tuple(normalize(keyword)), ExpressionCue.parse(cues)))
        return cls(entries)

    @classmethod
    def load(cls, path) -> "EmotionLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return [(" ".join(k), cue) for k, cue in self._entries.items()]

    def classify(self, text: str) -> ExpressionCue | None:
        """Cue of the first keyword found, longest keyword first per position."""
        tokens = tuple(normalize(text))
        for start in range(len(tokens)):
            for length in range(min(self._max_len, len(tokens) - start), 0, -1):
                cue = self._entries.get(tokens[start:start + length])
                if cue is not None:
                    return cue
        return None


_default: EmotionLexicon | None = None


def default_lexicon() -> EmotionLexicon:
    global _default
    if _default is None:
        content = resources.files("crisisbot.data").joinpath("emotion_lexicon.tsv").read_text("utf-8")
        _default = EmotionLexicon.loads(content)
    return _default


def classify_emotion(text: str, lexicon: EmotionLexicon | None = None) -> ExpressionCue | None:
    return (lexicon or default_lexicon()).classify(text)
