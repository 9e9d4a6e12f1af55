"""Post records, lexicons, tokenization and line-delimited ingestion."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from .errors import (
    DuplicateWord,
    MalformedRecord,
    MalformedRow,
    MissingField,
    ScoreOutOfRange,
)

REQUIRED_FIELDS = ("id", "user_id", "timestamp", "text")

_URL_MARKERS = ("http://", "https://", "www.")
# a token is an optional single '#'/'@' followed by a run of non-separator chars
_TOKEN_RE = re.compile(r"[#@]?[^\s#@]+")


def _keep_char(ch: str) -> bool:
    return ch.isalnum() or ch in "#@'"


def tokenize(text: str) -> list[str]:
    """Split text into lowercase word tokens.

    Everything other than letters, digits, apostrophes and a leading
    ``#``/``@`` acts as a separator. Apostrophes are kept inside words
    ("y'all") but stripped from the ends, so quoted words match the lexicon.

    >>> tokenize("#BCSM rocks, y'all")
    ['#bcsm', 'rocks', "y'all"]
    """
    if not text:
        return []
    cleaned = "".join(ch if _keep_char(ch) else " " for ch in text.lower())
    tokens = []
    for raw in _TOKEN_RE.findall(cleaned):
        if raw[0] in "#@":
            body = raw[1:].strip("'")
            if body:
                tokens.append(raw[0] + body)
        else:
            body = raw.strip("'")
            if body:
                tokens.append(body)
    return tokens


def has_url(text: str) -> bool:
    lowered = text.lower()
    return any(marker in lowered for marker in _URL_MARKERS)


@dataclass(frozen=True)
class Post:
    id: str
    user_id: str
    timestamp: int
    text: str
    lang: str = "und"
    is_retweet: bool = False
    has_url: bool = field(init=False)
    hashtags: tuple[str, ...] = field(init=False)
    tokens: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.id or not self.user_id:
            raise ValueError("post id and user_id must be nonempty")
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")
        toks = tuple(tokenize(self.text))
        object.__setattr__(self, "tokens", toks)
        object.__setattr__(self, "has_url", has_url(self.text))
        object.__setattr__(self, "hashtags", tuple(t for t in toks if t.startswith("#")))

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "user_id": self.user_id,
            "timestamp": self.timestamp,
            "text": self.text,
            "lang": self.lang,
            "is_retweet": self.is_retweet,
        }

    def to_line(self) -> str:
        return json.dumps(self.to_record(), ensure_ascii=False)


def _as_id(value, name, lineno):
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise MalformedRecord(lineno, f"{name} must be a string")
    value = str(value)
    if not value:
        raise MalformedRecord(lineno, f"{name} is empty")
    return value


def post_from_record(rec: Mapping, lineno: int = 0) -> Post:
    """Build a Post from one decoded record, validating the input schema."""
    for name in REQUIRED_FIELDS:
        if name not in rec:
            raise MissingField(lineno, name)
    ts = rec["timestamp"]
    if isinstance(ts, str) and ts.isdigit():
        ts = int(ts)
    if isinstance(ts, bool) or not isinstance(ts, int) or ts < 0:
        raise MalformedRecord(lineno, f"timestamp must be a nonnegative integer, got {ts!r}")
    text = rec["text"]
    if not isinstance(text, str):
        raise MalformedRecord(lineno, "text must be a string")
    lang = rec.get("lang", "und")
    if not isinstance(lang, str):
        raise MalformedRecord(lineno, "lang must be a string")
    is_rt = rec.get("is_retweet", False)
    if not isinstance(is_rt, bool):
        raise MalformedRecord(lineno, "is_retweet must be a boolean")
    return Post(
        id=_as_id(rec["id"], "id", lineno),
        user_id=_as_id(rec["user_id"], "user_id", lineno),
        timestamp=ts,
        text=text,
        lang=lang.lower(),
        is_retweet=is_rt,
    )


def iter_posts(lines: Iterable[str]) -> Iterator[Post]:
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise MalformedRecord(lineno, "record is not an object")
        yield post_from_record(rec, lineno)


def ingest(path) -> list[Post]:
    """Read a JSON-lines post file. Blank lines are skipped."""
    with open(path, encoding="utf-8") as fh:
        return list(iter_posts(fh))


def write_posts(posts: Iterable[Post], path, append: bool = False) -> int:
    n = 0
    with open(path, "a" if append else "w", encoding="utf-8", newline="\n") as fh:
        for post in posts:
            fh.write(post.to_line() + "\n")
            n += 1
    return n


# -- lexicon -----------------------------------------------------------------

@dataclass(frozen=True)
class LexiconFormat:
    """Column layout of a lexicon TSV (zero-based indices)."""

    word_col: int = 0
    score_col: int = 1
    delimiter: str = "\t"


LABMT_FORMAT = LexiconFormat(word_col=0, score_col=2)


@dataclass(frozen=True)
class Lexicon:
    entries: Mapping[str, float]
    name: str = ""

    def __post_init__(self):
        for word, s in self.entries.items():
            if not 1.0 <= s <= 9.0:
                raise ScoreOutOfRange(f"{word!r} has score {s} outside [1, 9]")
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def __len__(self):
        return len(self.entries)

    def __contains__(self, word):
        return word in self.entries

    def get(self, word, default=None):
        return self.entries.get(word, default)


def _parse_score(field_text):
    try:
        value = float(field_text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_lexicon(path, fmt: LexiconFormat = LexiconFormat(), name: str | None = None) -> Lexicon:
    path = Path(path)
    entries: dict[str, float] = {}
    ncols = None
    need = max(fmt.word_col, fmt.score_col) + 1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split(fmt.delimiter)
            if len(cols) < need:
                raise MalformedRow(f"{path}:{lineno}: expected at least {need} columns, got {len(cols)}")
            if ncols is None:
                ncols = len(cols)
                if _parse_score(cols[fmt.score_col]) is None:
                    continue  # header
            elif len(cols) != ncols:
                raise MalformedRow(f"{path}:{lineno}: expected {ncols} columns, got {len(cols)}")
            word = cols[fmt.word_col].strip()
            score = _parse_score(cols[fmt.score_col])
            if not word:
                raise MalformedRow(f"{path}:{lineno}: empty word")
            if score is None:
                raise MalformedRow(f"{path}:{lineno}: non-numeric score {cols[fmt.score_col]!r}")
            if not 1.0 <= score <= 9.0:
                raise ScoreOutOfRange(f"{path}:{lineno}: score {score} for {word!r} outside [1, 9]")
            if word in entries:
                raise DuplicateWord(f"{path}:{lineno}: duplicate word {word!r}")
            entries[word] = score
    return Lexicon(entries, name if name is not None else path.stem)


# -- frequency distributions -------------------------------------------------

class FreqDist(Mapping):
    """Immutable word -> positive count mapping."""

    __slots__ = ("_counts", "_total")

    def __init__(self, counts: Mapping[str, int] | Iterable[str] = ()):
        c = Counter(counts)
        for word, n in c.items():
            if n < 0 or int(n) != n:
                raise ValueError(f"count for {word!r} must be a nonnegative integer")
        self._counts = {w: int(n) for w, n in c.items() if n > 0}
        self._total = sum(self._counts.values())

    def __getitem__(self, word):
        return self._counts[word]

    def __iter__(self):
        return iter(self._counts)

    def __len__(self):
        return len(self._counts)

    def __repr__(self):
        return f"FreqDist({self._counts!r})"

    def __add__(self, other: FreqDist) -> FreqDist:
        merged = Counter(self._counts)
        merged.update(dict(other.items()))
        return FreqDist(merged)

    @property
    def counts(self) -> dict[str, int]:
        return dict(self._counts)

    @property
    def total(self) -> int:
        return self._total

    def scaled(self, k: int) -> FreqDist:
        return FreqDist({w: n * k for w, n in self._counts.items()})


def freq_dist(posts: Iterable[Post], drop_hashtags: bool = False) -> FreqDist:
    c: Counter = Counter()
    for post in posts:
        if drop_hashtags:
            c.update(t for t in post.tokens if not t.startswith("#"))
        else:
            c.update(post.tokens)
    return FreqDist(c)
