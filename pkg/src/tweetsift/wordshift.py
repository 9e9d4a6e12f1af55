"""Per-word decomposition of the happiness difference between two texts."""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

from .corpus import FreqDist, Lexicon
from .errors import NoCoverage
from .hedonometer import Lens, score, survivors

VALENCE_SYMBOL = {"positive": "+", "negative": "−", "neutral": " "}
ARROW = {"up": "↑", "down": "↓", "flat": " "}
NO_PERCENT = "—"


@dataclass(frozen=True)
class ShiftEntry:
    word: str
    contribution: float
    percent: float | None
    freq_direction: str   # up | down | flat
    valence: str          # positive | negative | neutral (h_w == h_ref)
    happiness: float
    p_ref: float
    p_comp: float

    @property
    def symbols(self) -> str:
        return VALENCE_SYMBOL[self.valence] + ARROW[self.freq_direction]


@dataclass(frozen=True)
class WordShift:
    ref_happiness: float
    comp_happiness: float
    entries: tuple[ShiftEntry, ...]

    @property
    def delta(self) -> float:
        return self.comp_happiness - self.ref_happiness


def _sign_word(x, pos, neg, zero):
    return pos if x > 0 else neg if x < 0 else zero


def shift(ref: FreqDist, comp: FreqDist, lexicon: Lexicon, lens: Lens | None = Lens()) -> WordShift:
    """Contribution of each scored word to h(comp) - h(ref).

    Each word contributes (h_w - h_ref) * (p_comp(w) - p_ref(w)) where p is
    the word's share of scored tokens; the contributions sum to the
    difference in average happiness.
    """
    try:
        s_ref = score(ref, lexicon, lens)
        s_comp = score(comp, lexicon, lens)
    except NoCoverage as exc:
        raise NoCoverage(f"word shift needs coverage on both sides: {exc}") from None
    h_ref = s_ref.value
    ref_n = {w: n for w, n, _ in survivors(ref, lexicon, lens)}
    comp_n = {w: n for w, n, _ in survivors(comp, lexicon, lens)}
    dh = s_comp.value - h_ref

    entries = []
    for word in ref_n.keys() | comp_n.keys():
        h = lexicon.get(word)
        p_ref = ref_n.get(word, 0) / s_ref.matched_tokens
        p_comp = comp_n.get(word, 0) / s_comp.matched_tokens
        contrib = (h - h_ref) * (p_comp - p_ref)
        entries.append(ShiftEntry(
            word=word,
            contribution=contrib,
            percent=100.0 * contrib / abs(dh) if dh != 0 else None,
            freq_direction=_sign_word(p_comp - p_ref, "up", "down", "flat"),
            valence=_sign_word(h - h_ref, "positive", "negative", "neutral"),
            happiness=h,
            p_ref=p_ref,
            p_comp=p_comp,
        ))
    entries.sort(key=lambda e: (-abs(e.contribution), e.word))
    return WordShift(h_ref, s_comp.value, tuple(entries))


def _fmt_percent(p):
    return NO_PERCENT if p is None else f"{p:.1f}%"


def render_text(ws: WordShift, top_n: int = 50) -> str:
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    lines = [
        f"# word shift: reference h_avg = {ws.ref_happiness:.4f}, "
        f"comparison h_avg = {ws.comp_happiness:.4f}, delta = {ws.delta:+.4f}",
        "# percent = 100 * contribution / |delta|;  +/− word above/below reference "
        "average, ↑/↓ more/less frequent in comparison",
    ]
    for rank, e in enumerate(ws.entries[:top_n], start=1):
        lines.append(f"{rank:>4}  {e.word} {e.symbols} {_fmt_percent(e.percent)}")
    return "\n".join(lines) + "\n"


_SVG_W = 640
_ROW_H = 18
_TOP = 48
_LABEL_PAD = 4


def render_svg(ws: WordShift, top_n: int = 50) -> str:
    """Horizontal bar chart of the top contributions; output is deterministic."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    shown = ws.entries[:top_n]
    height = _TOP + _ROW_H * max(len(shown), 1) + 24
    mid = _SVG_W / 2
    half = _SVG_W / 2 - 150
    biggest = max((abs(e.contribution) for e in shown), default=0.0)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_SVG_W}" height="{height}" '
        f'viewBox="0 0 {_SVG_W} {height}" font-family="sans-serif" font-size="11">',
        f'<text x="{mid:.1f}" y="16" text-anchor="middle" font-size="13">'
        f'reference {ws.ref_happiness:.4f} / comparison {ws.comp_happiness:.4f} '
        f'(delta {ws.delta:+.4f})</text>',
        f'<line x1="{mid:.1f}" y1="{_TOP - 8}" x2="{mid:.1f}" y2="{height - 16}" stroke="black"/>',
        f'<line x1="20" y1="{height - 16}" x2="{_SVG_W - 20}" y2="{height - 16}" stroke="black"/>',
        f'<text x="{mid:.1f}" y="{height - 2}" text-anchor="middle">contribution (% of |delta|)</text>',
    ]
    for i, e in enumerate(shown):
        y = _TOP + i * _ROW_H
        length = half * abs(e.contribution) / biggest if biggest > 0 else 0.0
        x = mid if e.contribution >= 0 else mid - length
        fill = "#f4a742" if e.valence == "positive" else "#4a7fd1"
        label = escape(f"{e.word} {e.symbols.strip()} {_fmt_percent(e.percent)}")
        if e.contribution >= 0:
            tx, anchor = mid + length + _LABEL_PAD, "start"
        else:
            tx, anchor = mid - length - _LABEL_PAD, "end"
        out.append(f'<rect x="{x:.2f}" y="{y}" width="{length:.2f}" height="{_ROW_H - 4}" fill="{fill}"/>')
        out.append(f'<text x="{tx:.2f}" y="{y + _ROW_H - 7}" text-anchor="{anchor}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
