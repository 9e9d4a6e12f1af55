"""Pre-classification filters, keyword queries and user activity statistics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, fields

from .corpus import Post

HOROSCOPE_TERMS = (
    "astrology", "zodiac", "astronomy", "horoscope", "aquarius", "pisces",
    "aries", "taurus", "leo", "virgo", "libra", "scorpio",
)

# attribution order; a post removed by several rules counts against the first
RULES = ("url", "retweet", "horoscope", "lang", "query")


@dataclass(frozen=True)
class FilterConfig:
    drop_urls: bool = True
    drop_retweets: bool = True
    horoscope_terms: tuple[str, ...] = HOROSCOPE_TERMS
    allowed_langs: frozenset[str] = frozenset({"en"})
    keyword_query: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "horoscope_terms", tuple(t.lower() for t in self.horoscope_terms))
        object.__setattr__(self, "allowed_langs", frozenset(l.lower() for l in self.allowed_langs))
        object.__setattr__(self, "keyword_query", tuple(t.lower() for t in self.keyword_query))


@dataclass
class FilterReport:
    input_count: int = 0
    kept_count: int = 0
    removed_by_url: int = 0
    removed_by_retweet: int = 0
    removed_by_horoscope: int = 0
    removed_by_lang: int = 0
    removed_by_query: int = 0

    def removed_total(self) -> int:
        return sum(getattr(self, f"removed_by_{r}") for r in RULES)

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def __add__(self, other: FilterReport) -> FilterReport:
        return FilterReport(**{k: v + other.as_dict()[k] for k, v in self.as_dict().items()})


def match_keywords(post: Post, terms) -> bool:
    """True iff every term is one of the post's tokens (empty query matches)."""
    if not terms:
        return True
    toks = set(post.tokens)
    return all(t in toks for t in terms)


def first_failing_rule(post: Post, config: FilterConfig) -> str | None:
    if config.drop_urls and post.has_url:
        return "url"
    if config.drop_retweets and post.is_retweet:
        return "retweet"
    if config.horoscope_terms and not set(config.horoscope_terms).isdisjoint(post.tokens):
        return "horoscope"
    if post.lang not in config.allowed_langs:
        return "lang"
    if not match_keywords(post, config.keyword_query):
        return "query"
    return None


def apply_filters(posts, config: FilterConfig = FilterConfig()) -> tuple[list[Post], FilterReport]:
    kept = []
    report = FilterReport()
    for post in posts:
        report.input_count += 1
        rule = first_failing_rule(post, config)
        if rule is None:
            kept.append(post)
        else:
            name = f"removed_by_{rule}"
            setattr(report, name, getattr(report, name) + 1)
    report.kept_count = len(kept)
    return kept, report


@dataclass
class UserActivity:
    histogram: dict[int, int] = field(default_factory=dict)  # posts-per-user -> users
    n_posts: int = 0
    n_users: int = 0
    mean: float | None = None
    max: int | None = None
    threshold: int = 10
    share_users_below: float | None = None
    share_posts_below: float | None = None


def user_activity(posts, threshold: int = 10) -> UserActivity:
    """Distribution of posts per user.

    ``share_users_below`` is the fraction of users with fewer than
    ``threshold`` posts; ``share_posts_below`` the fraction of all posts
    those users wrote.
    """
    per_user = Counter(p.user_id for p in posts)
    hist = Counter(per_user.values())
    n_posts = sum(per_user.values())
    act = UserActivity(histogram=dict(sorted(hist.items())), n_posts=n_posts,
                       n_users=len(per_user), threshold=threshold)
    if per_user:
        act.mean = n_posts / len(per_user)
        act.max = max(per_user.values())
        low = [n for n in per_user.values() if n < threshold]
        act.share_users_below = len(low) / len(per_user)
        act.share_posts_below = sum(low) / n_posts
    return act
