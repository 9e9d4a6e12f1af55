"""Rate-capped feed simulator and sampling-proportion estimator.

The server replays matching posts in timestamp order on a virtual clock.
Each one-second window delivers at most ``rate_cap`` posts; if any were
held back, one limit notice follows carrying that window's withheld count.

Wire format: every frame is a 4-byte big-endian length followed by that
many bytes of UTF-8 payload, either ``P<post json line>`` or
``L<timestamp> <withheld>``. The server closes the connection after the
last frame.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import struct
import threading
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from itertools import groupby

from .corpus import Post, iter_posts
from .errors import BindFailure, ConnectFailure, MalformedRecord, ProtocolError, SamplingUndefined
from .sift import match_keywords

log = logging.getLogger(__name__)

_LEN = struct.Struct(">I")
MAX_FRAME = 16 * 1024 * 1024


@dataclass(frozen=True)
class LimitNotice:
    timestamp: int
    withheld: int

    def __post_init__(self):
        if self.withheld < 0:
            raise ValueError("withheld must be >= 0")


@dataclass
class StreamStats:
    collected: int = 0
    limit_sum: int = 0
    estimated_rho: float | None = None
    notices: list[LimitNotice] = field(default_factory=list, repr=False)


def estimate_sampling(collected: int, limits: Iterable[LimitNotice | int]) -> float:
    """collected / (collected + total withheld)."""
    if collected < 0:
        raise ValueError("collected must be >= 0")
    withheld = sum(l.withheld if isinstance(l, LimitNotice) else int(l) for l in limits)
    if collected + withheld == 0:
        raise SamplingUndefined("nothing collected and nothing withheld")
    return collected / (collected + withheld)


# -- replay schedule ---------------------------------------------------------

@dataclass
class ReplayTally:
    matching: int = 0
    delivered: int = 0
    withheld: int = 0
    notices: int = 0


def replay_events(posts: Sequence[Post], rate_cap: int, keyword_query=(), tally: ReplayTally | None = None):
    """Yield ``Post`` and ``LimitNotice`` objects in wire order.

    Posts not matching ``keyword_query`` are skipped entirely. Ties in
    timestamp keep input order.
    """
    if rate_cap < 1:
        raise ValueError("rate_cap must be >= 1")
    tally = tally if tally is not None else ReplayTally()
    matching = sorted((p for p in posts if match_keywords(p, keyword_query)), key=lambda p: p.timestamp)
    for ts, group in groupby(matching, key=lambda p: p.timestamp):
        window = list(group)
        tally.matching += len(window)
        for post in window[:rate_cap]:
            tally.delivered += 1
            yield post
        extra = len(window) - rate_cap
        if extra > 0:
            tally.withheld += extra
            tally.notices += 1
            yield LimitNotice(ts, extra)


def delivered_fraction(window_counts: Iterable[int], cap: int) -> float:
    counts = list(window_counts)
    total = sum(counts)
    return sum(min(n, cap) for n in counts) / total if total else 1.0


def engineer_cap(window_counts: Iterable[int], target: float) -> int:
    """Cap whose true delivered fraction is closest to ``target``."""
    counts = list(window_counts)
    best, best_err = 1, float("inf")
    for cap in range(1, max(counts, default=1) + 1):
        err = abs(delivered_fraction(counts, cap) - target)
        if err < best_err:
            best, best_err = cap, err
    return best


# -- framing -----------------------------------------------------------------

def encode_frame(payload: bytes) -> bytes:
    return _LEN.pack(len(payload)) + payload


def encode_event(event) -> bytes:
    if isinstance(event, Post):
        return encode_frame(b"P" + event.to_line().encode("utf-8"))
    return encode_frame(f"L{event.timestamp} {event.withheld}".encode("ascii"))


def _read_exact(stream, n):
    buf = b""
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            return buf
        buf += chunk
    return buf


def read_frame(stream) -> bytes | None:
    """Next frame payload, or None on a clean end of stream."""
    head = _read_exact(stream, 4)
    if not head:
        return None
    if len(head) < 4:
        raise ProtocolError("stream ended inside a frame header")
    (n,) = _LEN.unpack(head)
    if n > MAX_FRAME:
        raise ProtocolError(f"frame of {n} bytes exceeds limit")
    body = _read_exact(stream, n)
    if len(body) < n:
        raise ProtocolError("stream ended inside a frame body")
    return body


def decode_payload(payload: bytes):
    if not payload:
        raise ProtocolError("empty frame")
    kind, rest = payload[:1], payload[1:]
    try:
        text = rest.decode("utf-8")
    except UnicodeDecodeError:
        raise ProtocolError("frame is not valid UTF-8") from None
    if kind == b"P":
        try:
            return next(iter_posts([text]))
        except (MalformedRecord, StopIteration) as exc:
            raise ProtocolError(f"bad post frame: {exc}") from None
    if kind == b"L":
        parts = text.split(" ")
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ProtocolError(f"bad limit frame {text!r}")
        return LimitNotice(int(parts[0]), int(parts[1]))
    raise ProtocolError(f"unknown frame type {kind!r}")


# -- server ------------------------------------------------------------------

class _ReplayHandler(socketserver.StreamRequestHandler):
    def handle(self):
        srv: FeedServer = self.server
        tally = ReplayTally()
        last_window = None
        try:
            for event in replay_events(srv.posts, srv.rate_cap, srv.keyword_query, tally):
                if srv.throttle:
                    ts = event.timestamp
                    if last_window is not None and ts != last_window:
                        time.sleep(srv.throttle * (ts - last_window))
                    last_window = ts
                self.wfile.write(encode_event(event))
            self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError) as exc:
            log.warning("client %s disconnected: %s", self.client_address, exc)
            srv.record(tally, completed=False)
            return
        srv.record(tally, completed=True)


class FeedServer(socketserver.ThreadingTCPServer):
    """Replays a fixed post list to every client that connects.

    Each connection gets its own cursor. ``throttle`` is real seconds per
    virtual second (None replays as fast as possible). ``sessions`` keeps the
    tally of every finished connection.
    """

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, posts, rate_cap: int, keyword_query=(), host: str = "127.0.0.1",
                 port: int = 0, throttle: float | None = None):
        if rate_cap < 1:
            raise ValueError("rate_cap must be >= 1")
        self.posts = list(posts)
        self.rate_cap = rate_cap
        self.keyword_query = tuple(keyword_query)
        self.throttle = throttle
        self.sessions: list[tuple[ReplayTally, bool]] = []
        self._lock = threading.Lock()
        self._done = threading.Condition(self._lock)
        self._thread = None
        try:
            super().__init__((host, port), _ReplayHandler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from None

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def record(self, tally: ReplayTally, completed: bool):
        with self._done:
            self.sessions.append((tally, completed))
            self._done.notify_all()

    def wait_sessions(self, n: int, timeout: float | None = None) -> bool:
        with self._done:
            return self._done.wait_for(lambda: len(self.sessions) >= n, timeout)

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve(posts, rate_cap: int, keyword_query=(), port: int = 0, host: str = "127.0.0.1",
          throttle: float | None = None, max_sessions: int | None = None, ready=None):
    """Run a feed server in the foreground.

    Returns after ``max_sessions`` completed connections (forever when None).
    ``ready`` is called with the bound address once listening.
    """
    server = FeedServer(posts, rate_cap, keyword_query, host, port, throttle)
    with server:
        if ready is not None:
            ready(server.address)
        if max_sessions is None:
            while True:
                time.sleep(3600)
        server.wait_sessions(max_sessions)
    return server.sessions


# -- client ------------------------------------------------------------------

def consume(address, output_path=None, limits_path=None, timeout: float = 30.0) -> StreamStats:
    """Read a whole stream, appending delivered posts to ``output_path``.

    ``limits_path``, when given, receives one ``timestamp<TAB>withheld`` line
    per notice. ``estimated_rho`` is None when nothing was collected or
    withheld.
    """
    host, port = address
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise ConnectFailure(f"cannot connect to {host}:{port}: {exc}") from None
    stats = StreamStats()
    out = open(output_path, "a", encoding="utf-8", newline="\n") if output_path else None
    try:
        with sock, sock.makefile("rb") as stream:
            while (payload := read_frame(stream)) is not None:
                event = decode_payload(payload)
                if isinstance(event, LimitNotice):
                    stats.notices.append(event)
                    stats.limit_sum += event.withheld
                else:
                    stats.collected += 1
                    if out:
                        out.write(event.to_line() + "\n")
    finally:
        if out:
            out.close()
    if limits_path:
        with open(limits_path, "a", encoding="utf-8", newline="\n") as fh:
            for n in stats.notices:
                fh.write(f"{n.timestamp}\t{n.withheld}\n")
    try:
        stats.estimated_rho = estimate_sampling(stats.collected, stats.notices)
    except SamplingUndefined:
        stats.estimated_rho = None
    return stats
