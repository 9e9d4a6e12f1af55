"""Lexicon-weighted average happiness, time series and hashtag tables."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone

from .corpus import FreqDist, Lexicon, Post, freq_dist
from .errors import NoCoverage


@dataclass(frozen=True)
class Lens:
    """Neutral band [center - delta, center + delta], both ends inclusive."""

    center: float = 5.0
    delta: float = 1.0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("lens delta must be nonnegative")

    def excludes(self, h: float) -> bool:
        return self.center - self.delta <= h <= self.center + self.delta


@dataclass(frozen=True)
class HappinessScore:
    value: float
    matched_tokens: int
    distinct_words: int


def survivors(dist, lexicon: Lexicon, lens: Lens | None):
    """Yield (word, count, h) for words that are scored: in the lexicon, outside the lens."""
    for word, n in dist.items():
        h = lexicon.get(word)
        if h is None or (lens is not None and lens.excludes(h)):
            continue
        yield word, n, h


def score(dist: FreqDist, lexicon: Lexicon, lens: Lens | None = Lens()) -> HappinessScore:
    """Frequency-weighted mean of lexicon scores over the surviving words."""
    num = []
    total = 0
    distinct = 0
    for _, n, h in survivors(dist, lexicon, lens):
        num.append(n * h)
        total += n
        distinct += 1
    if total == 0:
        raise NoCoverage("no words survive the lexicon and lens")
    value = math.fsum(num) / total
    # clamp roundoff so the [1, 9] invariant holds exactly
    value = min(max(value, 1.0), 9.0)
    return HappinessScore(value, total, distinct)


def try_score(dist, lexicon, lens=Lens()) -> HappinessScore | None:
    try:
        return score(dist, lexicon, lens)
    except NoCoverage:
        return None


# -- time series -------------------------------------------------------------

def bin_start(timestamp: int, bin: str) -> int:
    dt = datetime.fromtimestamp(timestamp, tz=timezone.utc)
    if bin == "day":
        start = dt.replace(hour=0, minute=0, second=0, microsecond=0)
    elif bin == "month":
        start = dt.replace(day=1, hour=0, minute=0, second=0, microsecond=0)
    else:
        raise ValueError(f"unknown bin {bin!r}; expected 'day' or 'month'")
    return int(start.timestamp())


@dataclass(frozen=True)
class TimeBin:
    start: int
    posts: int
    score: HappinessScore | None

    @property
    def label(self) -> str:
        return datetime.fromtimestamp(self.start, tz=timezone.utc).strftime("%Y-%m-%d")


def timeseries(posts, lexicon: Lexicon, lens: Lens | None = Lens(), bin: str = "day") -> list[TimeBin]:
    """Score posts grouped by UTC day or month.

    Only bins that contain posts are returned; bins whose words all miss the
    lexicon carry ``score=None``.
    """
    groups: dict[int, list[Post]] = defaultdict(list)
    for p in posts:
        groups[bin_start(p.timestamp, bin)].append(p)
    return [
        TimeBin(start, len(group), try_score(freq_dist(group), lexicon, lens))
        for start, group in sorted(groups.items())
    ]


# -- hashtags ----------------------------------------------------------------

TOTAL_TAG = "Total"


@dataclass(frozen=True)
class HashtagRow:
    tag: str
    tweets: int
    users: int
    ambient: HappinessScore | None


def _row(tag, group, lexicon, lens):
    ambient = try_score(freq_dist(group, drop_hashtags=True), lexicon, lens)
    return HashtagRow(tag, len(group), len({p.user_id for p in group}), ambient)


def hashtag_table(posts, lexicon: Lexicon, lens: Lens | None = Lens(), top_k: int = 50,
                  sort: str = "frequency") -> list[HashtagRow]:
    """Most frequent hashtags with their ambient happiness.

    The ``top_k`` tags are chosen by tweet count (ties alphabetical). With
    ``sort="happiness"`` the same tags are reordered by ambient score, highest
    first, unscored tags last. The final row, tagged ``"Total"``, aggregates
    every post that carries at least one listed tag.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if sort not in ("frequency", "happiness"):
        raise ValueError(f"unknown sort {sort!r}")
    posts = list(posts)
    by_tag: dict[str, list[int]] = defaultdict(list)
    for i, p in enumerate(posts):
        for tag in dict.fromkeys(p.hashtags):
            by_tag[tag].append(i)
    chosen = sorted(by_tag, key=lambda t: (-len(by_tag[t]), t))[:top_k]
    rows = [_row(t, [posts[i] for i in by_tag[t]], lexicon, lens) for t in chosen]
    if sort == "happiness":
        rows.sort(key=lambda r: (r.ambient is None, -(r.ambient.value if r.ambient else 0.0), r.tag))

    union = sorted({i for t in chosen for i in by_tag[t]})
    rows.append(_row(TOTAL_TAG, [posts[i] for i in union], lexicon, lens))
    return rows
