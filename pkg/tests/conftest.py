import pytest

from tweetsift.corpus import Lexicon, Post
from tweetsift.synth import demo_lexicon


@pytest.fixture
def lexicon():
    return demo_lexicon()


@pytest.fixture
def good_bad():
    return Lexicon({"good": 8.0, "bad": 2.0}, "good-bad")


def make_post(text, i=0, user="u0", ts=1483228800, lang="en", rt=False):
    return Post(id=str(i), user_id=user, timestamp=ts, text=text, lang=lang, is_retweet=rt)


@pytest.fixture
def post():
    return make_post


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
