from collections import Counter

import pytest

from tweetsift.sift import (
    HOROSCOPE_TERMS,
    RULES,
    FilterConfig,
    apply_filters,
    match_keywords,
    user_activity,
)
from tweetsift.synth import activity_posts, fuzz_posts

from conftest import make_post


def test_default_config():
    cfg = FilterConfig()
    assert cfg.horoscope_terms == ("astrology", "zodiac", "astronomy", "horoscope", "aquarius", "pisces",
                                   "aries", "taurus", "leo", "virgo", "libra", "scorpio")
    assert len(HOROSCOPE_TERMS) == 12
    assert cfg.allowed_langs == {"en"}


@pytest.mark.parametrize("text, rt, lang, rule", [
    ("see https://t.co/x", False, "en", "url"),
    ("aquarius season again", False, "en", "horoscope"),
    ("retweeted thing", True, "en", "retweet"),
    ("hola", False, "es", "lang"),
    ("only cancer here", False, "en", "query"),
    ("see https://t.co/x aquarius", True, "es", "url"),
])
def test_rule_attribution(text, rt, lang, rule):
    kept, report = apply_filters([make_post(text, rt=rt, lang=lang)], FilterConfig(keyword_query=("breast", "cancer")))
    assert kept == []
    assert getattr(report, f"removed_by_{rule}") == 1
    assert report.removed_total() == 1


def test_plain_post_kept():
    p = make_post("my breast cancer surgery went well")
    kept, report = apply_filters([p], FilterConfig(keyword_query=("breast", "cancer")))
    assert kept == [p] and report.kept_count == 1 and report.input_count == 1


def test_horoscope_is_token_based():
    kept, _ = apply_filters([make_post("a cancerian leopard"), make_post("Leo!")])
    assert [p.text for p in kept] == ["a cancerian leopard"]


def test_rules_can_be_disabled():
    cfg = FilterConfig(drop_urls=False, drop_retweets=False, horoscope_terms=(), allowed_langs={"en", "es"})
    posts = [make_post("http://x leo", rt=True), make_post("x", lang="es")]
    assert apply_filters(posts, cfg)[0] == posts


@pytest.mark.parametrize("text, terms, expected", [
    ("Breast cancer awareness", ["breast", "cancer"], True),
    ("anything", [], True),
    ("breastfeeding tips", ["breast"], False),
])
def test_match_keywords(text, terms, expected):
    assert match_keywords(make_post(text), terms) is expected


def _violations(post, cfg):
    """Independent re-scan straight from the raw text and fields."""
    low = post.text.lower()
    out = []
    if cfg.drop_urls and ("http://" in low or "https://" in low or "www." in low):
        out.append("url")
    if cfg.drop_retweets and post.is_retweet:
        out.append("retweet")
    words = set("".join(c if c.isalnum() or c in "'#@" else " " for c in low).replace("#", " #").replace("@", " @").split())
    words = {w.strip("'") for w in words}
    if words & set(cfg.horoscope_terms):
        out.append("horoscope")
    if post.lang not in cfg.allowed_langs:
        out.append("lang")
    if not set(cfg.keyword_query) <= words:
        out.append("query")
    return out


@pytest.mark.parametrize("query", [(), ("cancer",)])
def test_fuzzed_filters_sound_and_idempotent(query):
    cfg = FilterConfig(keyword_query=query)
    posts = fuzz_posts(3000, seed=5)
    kept, report = apply_filters(posts, cfg)
    assert all(not _violations(p, cfg) for p in kept)
    assert report.input_count == report.kept_count + report.removed_total() == len(posts)
    # every removed post really violates its attributed rule and no earlier one
    kept_ids = {p.id for p in kept}
    tally = Counter()
    for p in posts:
        if p.id not in kept_ids:
            v = _violations(p, cfg)
            assert v, p.text
            tally[v[0]] += 1
    assert tally == Counter({r: getattr(report, f"removed_by_{r}") for r in RULES if getattr(report, f"removed_by_{r}")})
    again, rep2 = apply_filters(kept, cfg)
    assert again == kept and rep2.kept_count == len(kept)


def test_report_addition():
    posts = fuzz_posts(200, seed=1)
    _, whole = apply_filters(posts)
    _, a = apply_filters(posts[:80])
    _, b = apply_filters(posts[80:])
    assert a + b == whole


def test_user_activity_small():
    posts = [make_post("x", user="A")] * 3 + [make_post("x", user="B")]
    act = user_activity(posts)
    assert act.histogram == {3: 1, 1: 1}
    assert act.mean == 2.0 and act.max == 3
    assert act.share_users_below == 1.0


def test_user_activity_empty():
    act = user_activity([])
    assert act.histogram == {} and act.mean is None and act.max is None


def test_user_activity_matches_generator():
    posts, tally = activity_posts(10_000, seed=3)
    act = user_activity(posts)
    assert act.histogram == dict(tally)
    assert sum(k * v for k, v in act.histogram.items()) == len(posts) == 10_000
    assert act.mean == pytest.approx(len(posts) / act.n_users)
