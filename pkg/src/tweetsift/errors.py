"""Exception hierarchy shared across the package."""


class TweetSiftError(Exception):
    """Base class for every error raised by tweetsift."""


class DataError(TweetSiftError):
    """Bad input data (records, lexicons, corpora)."""


class ModelError(TweetSiftError):
    """Training failures and unreadable model files."""


class MalformedRow(DataError):
    pass


class ScoreOutOfRange(DataError):
    pass


class DuplicateWord(DataError):
    pass


class MalformedRecord(DataError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class MissingField(MalformedRecord):
    def __init__(self, lineno, field):
        super().__init__(lineno, f"missing required field {field!r}")
        self.field = field


class NoCoverage(DataError):
    """No token survives the lexicon and lens."""


class EmptyCorpus(DataError):
    pass


class SingleClass(ModelError):
    pass


class NonFiniteLoss(ModelError):
    pass


class ModelFormatError(ModelError):
    pass


class SamplingUndefined(DataError):
    """Sampling proportion requested with nothing collected and nothing withheld."""


class FeedError(TweetSiftError):
    pass


class BindFailure(FeedError):
    pass


class ConnectFailure(FeedError):
    pass


class ProtocolError(FeedError):
    pass
