"""Seeded synthetic corpora with known ground truth.

Every generator returns its own tallies so callers can check pipeline
output against what was planted.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus import Lexicon, Post
from .relevance import LabeledExample
from .sift import HOROSCOPE_TERMS

DAY = 86400
EPOCH_2017 = 1483228800  # 2017-01-01T00:00:00Z

# first six are published LabMT averages; the rest are illustrative values
DEMO_SCORES = {
    "laughter": 8.50, "love": 8.42, "healthy": 8.02, "emergency": 3.06,
    "hate": 2.34, "die": 1.74, "happy": 8.30, "thank": 7.40, "support": 7.20,
    "hope": 7.38, "sick": 2.64, "pain": 2.58, "scared": 2.70, "sad": 2.38,
    "the": 4.98, "of": 4.94, "and": 5.22, "a": 5.24, "my": 5.88, "was": 5.02,
    "just": 5.10, "today": 5.90, "cancer": 1.54, "breast": 5.46, "chemo": 2.96,
    "surgery": 3.20, "survivor": 7.12, "strong": 7.00, "fight": 3.70,
    "tired": 3.34, "good": 7.20, "bad": 2.64, "friends": 7.66, "family": 7.70,
}

FILLER = (
    "the of and a to in is it you that was for on are with as at be this have "
    "from or one had by word but not what all were we when your can said there "
    "use an each which she do how their if will up other about out many then "
    "them these so some her would make like him into time has look two more "
    "write go see number no way could people than first water been call who "
    "oil its now find long down day did get come made may part"
).split()

POSITIVE_WORDS = ("laughter", "love", "healthy", "happy", "thank", "hope", "good", "friends")
NEGATIVE_WORDS = ("emergency", "hate", "die", "sick", "pain", "scared", "sad", "bad")

# stage-one markers: posts about someone's cancer care
RELEVANT_MARKERS = ("chemo", "oncologist", "mastectomy", "tumor", "biopsy", "radiation", "lumpectomy")
# stage-two phrases: first-person diagnosis versus someone else's
DIAGNOSTIC_PHRASES = ("i was diagnosed", "my own diagnosis", "i am a survivor", "my tumor was removed")
OTHER_PHRASES = ("my mom has", "my sister started", "praying for my aunt", "my friend's")
UNRELATED_TOPICS = ("awareness walk", "pink ribbon sale", "fundraiser tonight", "research grant news")


def demo_lexicon() -> Lexicon:
    return Lexicon(DEMO_SCORES, "demo")


def random_lexicon(rng, n_words: int) -> Lexicon:
    return Lexicon({f"w{i}": float(rng.uniform(1.0, 9.0)) for i in range(n_words)}, "random")


def _text(rng, words, n):
    return " ".join(rng.choice(words, size=n))


# -- fuzz corpus -------------------------------------------------------------

FUZZ_DECOR = ("!", "?", ",", "...", " :)", " #bcsm", " #Pink", " @friend", " 😀", " y'all", " don't")


def fuzz_posts(n: int, seed: int = 0) -> list[Post]:
    """Posts with random URLs, retweets, horoscope words, languages and
    punctuation, for checking filter soundness."""
    rng = np.random.default_rng(seed)
    vocab = list(FILLER) + ["breast", "cancer", "breastfeeding", "cancerian", "leopard",
                            "Leo", "ARIES", "link"] + list(HOROSCOPE_TERMS)
    langs = ["en", "en", "en", "es", "fr", "und", "EN"]
    posts = []
    for i in range(n):
        parts = list(rng.choice(vocab, size=int(rng.integers(1, 15))))
        for _ in range(int(rng.integers(0, 3))):
            parts.insert(int(rng.integers(0, len(parts) + 1)), str(rng.choice(FUZZ_DECOR)))
        r = rng.random()
        if r < 0.08:
            parts.append("http://t.co/" + str(i))
        elif r < 0.12:
            parts.append("WWW.example.org")
        elif r < 0.14:
            parts.insert(0, "HTTPS://x.co")
        posts.append(Post(
            id=str(i), user_id=f"u{int(rng.integers(0, n // 5 + 1))}",
            timestamp=EPOCH_2017 + int(rng.integers(0, 60 * DAY)),
            text=" ".join(parts), lang=str(rng.choice(langs)).lower(),
            is_retweet=bool(rng.random() < 0.15),
        ))
    return posts


# -- user activity -----------------------------------------------------------

def activity_posts(n: int, seed: int = 0) -> tuple[list[Post], Counter]:
    """Posts whose per-user counts follow a heavy-tailed draw.

    Returns the posts and the generator's own posts-per-user tally.
    """
    rng = np.random.default_rng(seed)
    per_user = []
    remaining = n
    while remaining > 0:
        k = min(int(rng.zipf(2.0)), remaining)
        per_user.append(k)
        remaining -= k
    posts = []
    for u, k in enumerate(per_user):
        for j in range(k):
            posts.append(Post(id=f"{u}-{j}", user_id=f"user{u}", timestamp=EPOCH_2017 + len(posts),
                              text="breast cancer", lang="en"))
    order = rng.permutation(len(posts))
    return [posts[i] for i in order], Counter(per_user)


# -- happiness series --------------------------------------------------------

def planted_days(n_days: int = 30, per_day: int = 20, seed: int = 0):
    """Posts over ``n_days`` days; a third of the days lean positive, a
    third negative. Returns (posts, {day_start: 'positive'|'negative'|'mixed'})."""
    rng = np.random.default_rng(seed)
    posts, kinds = [], {}
    for d in range(n_days):
        kind = ("positive", "negative", "mixed")[d % 3]
        start = EPOCH_2017 + d * DAY
        kinds[start] = kind
        for j in range(per_day):
            if kind == "positive":
                words = POSITIVE_WORDS if rng.random() < 0.85 else NEGATIVE_WORDS
            elif kind == "negative":
                words = NEGATIVE_WORDS if rng.random() < 0.85 else POSITIVE_WORDS
            else:
                words = POSITIVE_WORDS + NEGATIVE_WORDS
            text = _text(rng, list(words) + list(FILLER[:10]), int(rng.integers(3, 10)))
            posts.append(Post(id=f"d{d}-{j}", user_id=f"u{int(rng.integers(0, 50))}",
                              timestamp=start + int(rng.integers(0, DAY)), text=text, lang="en"))
    return posts, kinds


# -- classifier corpora ------------------------------------------------------

def separable_examples(n: int = 400, seed: int = 0) -> list[LabeledExample]:
    """Each example carries one class marker token among random filler."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = i % 2
        words = list(rng.choice(FILLER, size=int(rng.integers(3, 12))))
        words.insert(int(rng.integers(0, len(words) + 1)), "relmarker" if label else "othermarker")
        out.append(LabeledExample(" ".join(words), label))
    order = rng.permutation(n)
    return [out[i] for i in order]


def marker_phrase_examples(n: int = 1000, seed: int = 0, positive_share: float = 0.4) -> list[LabeledExample]:
    """Label 1 iff the text contains a first-person diagnostic phrase."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        label = int(rng.random() < positive_share)
        phrases = DIAGNOSTIC_PHRASES if label else OTHER_PHRASES
        words = list(rng.choice(FILLER, size=int(rng.integers(4, 16))))
        pos = int(rng.integers(0, len(words) + 1))
        words[pos:pos] = str(rng.choice(phrases)).split() + [str(rng.choice(RELEVANT_MARKERS))]
        out.append(LabeledExample(" ".join(words), label))
    return out


# -- cohort funnel -----------------------------------------------------------

@dataclass
class CohortPlant:
    posts: list[Post]
    kinds: list[str]                      # per post: unrelated | relevant | diagnostic
    clean: list[bool]                     # per post: survives the default filters
    logistic_train: list[LabeledExample] = field(default_factory=list)
    cnn_train: list[LabeledExample] = field(default_factory=list)

    @property
    def expected_relevant(self) -> int:
        return sum(1 for k, c in zip(self.kinds, self.clean) if c and k != "unrelated")

    @property
    def expected_diagnostic(self) -> int:
        return sum(1 for k, c in zip(self.kinds, self.clean) if c and k == "diagnostic")

    @property
    def expected_users(self) -> set[str]:
        return {p.user_id for p, k, c in zip(self.posts, self.kinds, self.clean) if c and k == "diagnostic"}


def _cohort_text(rng, kind):
    words = list(rng.choice(FILLER, size=int(rng.integers(3, 10))))
    if kind == "unrelated":
        insert = ["breast", "cancer"] + str(rng.choice(UNRELATED_TOPICS)).split()
    else:
        phrases = DIAGNOSTIC_PHRASES if kind == "diagnostic" else OTHER_PHRASES
        insert = str(rng.choice(phrases)).split() + ["breast", "cancer", str(rng.choice(RELEVANT_MARKERS))]
    pos = int(rng.integers(0, len(words) + 1))
    words[pos:pos] = insert
    return " ".join(words)


def cohort_corpus(n: int = 2000, seed: int = 0, n_train: int = 1000) -> CohortPlant:
    """Posts with planted relevant and diagnostic content plus matching
    training sets for both classifiers (drawn independently of the posts)."""
    rng = np.random.default_rng(seed)
    posts, kinds, clean = [], [], []
    for i in range(n):
        kind = rng.choice(["unrelated", "relevant", "diagnostic"], p=[0.6, 0.25, 0.15])
        text = _cohort_text(rng, kind)
        noise = rng.random()
        is_rt = bool(noise < 0.05)
        lang = "es" if 0.05 <= noise < 0.08 else "en"
        if 0.08 <= noise < 0.12:
            text += " https://t.co/abc"
        if 0.12 <= noise < 0.14:
            text += " horoscope"
        posts.append(Post(id=f"c{i}", user_id=f"u{int(rng.integers(0, n // 3))}",
                          timestamp=EPOCH_2017 + int(rng.integers(0, 90 * DAY)),
                          text=text, lang=lang, is_retweet=is_rt))
        kinds.append(str(kind))
        clean.append(noise >= 0.14)
    plant = CohortPlant(posts, kinds, clean)
    for _ in range(n_train):
        kind = str(rng.choice(["unrelated", "relevant", "diagnostic"], p=[0.5, 0.25, 0.25]))
        text = _cohort_text(rng, kind)
        plant.logistic_train.append(LabeledExample(text, int(kind != "unrelated")))
        if kind != "unrelated":
            plant.cnn_train.append(LabeledExample(text, int(kind == "diagnostic")))
    return plant


# -- feed arrivals -----------------------------------------------------------

def poisson_arrivals(n: int, rate: float, seed: int = 0, start: int = EPOCH_2017,
                     text: str = "breast cancer update") -> list[Post]:
    """``n`` posts whose per-second counts are Poisson(rate)."""
    rng = np.random.default_rng(seed)
    posts = []
    t = start
    while len(posts) < n:
        k = min(int(rng.poisson(rate)), n - len(posts))
        for _ in range(k):
            posts.append(Post(id=str(len(posts)), user_id=f"u{int(rng.integers(0, 1000))}",
                              timestamp=t, text=text, lang="en"))
        t += 1
    return posts
