"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 model error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from . import convnet, feedsim, relevance, synth
from .corpus import LexiconFormat, freq_dist, ingest, load_lexicon, write_posts
from .errors import DataError, FeedError, ModelError, NoCoverage, SamplingUndefined
from .hedonometer import Lens, hashtag_table, timeseries
from .pipeline import run_cohort
from .sift import HOROSCOPE_TERMS, FilterConfig, apply_filters, user_activity
from .wordshift import render_svg, render_text, shift

log = logging.getLogger("tweetsift")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3
NA = "NA"

# config keys understood in --config files, with their built-in defaults
DEFAULTS = {
    "drop_urls": True,
    "drop_retweets": True,
    "horoscope_terms": list(HOROSCOPE_TERMS),
    "allowed_langs": ["en"],
    "keyword_query": [],
    "lens_center": 5.0,
    "lens_delta": 1.0,
    "lexicon": None,
    "lexicon_word_col": 0,
    "lexicon_score_col": 1,
    "logistic_model": None,
    "cnn_model": None,
    "bin": "day",
    "top_k": 50,
    "seed": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _as_bool(v: str) -> bool:
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _as_list(v: str) -> list[str]:
    return [t.strip().lower() for t in v.split(",") if t.strip()]


_CONVERT = {
    "drop_urls": _as_bool, "drop_retweets": _as_bool,
    "horoscope_terms": _as_list, "allowed_langs": _as_list, "keyword_query": _as_list,
    "lens_center": float, "lens_delta": float,
    "lexicon_word_col": int, "lexicon_score_col": int, "top_k": int, "seed": int,
}


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment line."""
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            cfg[key] = _CONVERT.get(key, str)(value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return cfg


def settings(args) -> dict:
    """Built-in defaults, overridden by the config file, overridden by flags."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def filter_config(s) -> FilterConfig:
    return FilterConfig(drop_urls=s["drop_urls"], drop_retweets=s["drop_retweets"],
                        horoscope_terms=tuple(s["horoscope_terms"]),
                        allowed_langs=frozenset(s["allowed_langs"]),
                        keyword_query=tuple(s["keyword_query"]))


def _lens(s) -> Lens | None:
    if s["lens_delta"] < 0:
        return None
    return Lens(s["lens_center"], s["lens_delta"])


def _lexicon(s):
    if not s["lexicon"]:
        raise UsageError("a lexicon is required (--lexicon or 'lexicon' in the config)")
    return load_lexicon(s["lexicon"], LexiconFormat(s["lexicon_word_col"], s["lexicon_score_col"]))


def tsv_header(*columns) -> str:
    return f"# tweetsift {__version__}: " + "\t".join(columns)


def _fmt(x, digits=6):
    return NA if x is None else f"{x:.{digits}f}"


def _out(path):
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="\n")


def _emit(lines, path):
    fh = _out(path)
    try:
        fh.write("".join(line + "\n" for line in lines))
    finally:
        if fh is not sys.stdout:
            fh.close()


# -- subcommands -------------------------------------------------------------

def cmd_sift(args):
    s = settings(args)
    kept, report = apply_filters(ingest(args.input), filter_config(s))
    write_posts(kept, args.output)
    for key, value in report.as_dict().items():
        print(f"{key}\t{value}", file=sys.stderr)
    return EXIT_OK


def cmd_activity(args):
    act = user_activity(ingest(args.input), threshold=args.threshold)
    lines = [tsv_header("posts_per_user", "users")]
    lines += [f"{k}\t{v}" for k, v in act.histogram.items()]
    _emit(lines, args.output)
    print(f"posts\t{act.n_posts}\nusers\t{act.n_users}\nmean_posts_per_user\t{_fmt(act.mean, 4)}\n"
          f"max_posts_per_user\t{act.max if act.max is not None else NA}\n"
          f"share_users_below_{act.threshold}\t{_fmt(act.share_users_below, 4)}\n"
          f"share_posts_below_{act.threshold}\t{_fmt(act.share_posts_below, 4)}", file=sys.stderr)
    return EXIT_OK


def cmd_happiness(args):
    s = settings(args)
    series = timeseries(ingest(args.input), _lexicon(s), _lens(s), s["bin"])
    lines = [tsv_header("bin_start", "date", "posts", "h_avg", "matched_tokens")]
    for b in series:
        h = b.score.value if b.score else None
        matched = b.score.matched_tokens if b.score else 0
        lines.append(f"{b.start}\t{b.label}\t{b.posts}\t{_fmt(h)}\t{matched}")
    _emit(lines, args.output)
    return EXIT_OK


def cmd_shift(args):
    s = settings(args)
    lex = _lexicon(s)
    ws = shift(freq_dist(ingest(args.ref)), freq_dist(ingest(args.comp)), lex, _lens(s))
    sys.stdout.write(render_text(ws, args.top_n))
    if args.svg:
        Path(args.svg).write_text(render_svg(ws, args.top_n), encoding="utf-8")
    return EXIT_OK


def _parse_alpha(text):
    if text is None:
        return None
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"alpha must look like 1:10, got {text!r}") from None
    return a, b


def cmd_train(args):
    s = settings(args)
    seed = s["seed"]
    if seed is None:
        raise UsageError("--seed is required for train")
    examples = relevance.read_labeled(args.labeled)
    if args.kind == "logistic":
        model = relevance.train_logistic(
            examples, alpha=_parse_alpha(args.alpha), l2_lambda=args.l2,
            lr=args.lr if args.lr is not None else 0.1,
            epochs=args.epochs if args.epochs is not None else 500, seed=seed)
        relevance.save_logistic(model, args.model_out)
        acc = relevance.accuracy(model, examples)
        print(f"kind=logistic\ttrain_accuracy={acc:.4f}\tloss={model.history[-1] if model.history else float('nan'):.6f}"
              f"\tvocabulary={len(model.vectorizer.vocabulary)}")
    else:
        hyper = convnet.CnnHyper(
            embed_dim=args.embed_dim, filter_widths=tuple(int(k) for k in args.filter_widths.split(",")),
            filters_per_width=args.filters, dropout_keep=args.dropout_keep, batch_size=args.batch_size,
            lr=args.lr if args.lr is not None else 1e-3,
            epochs=args.epochs if args.epochs is not None else 10, seed=seed)
        model = convnet.train_cnn(examples, hyper)
        convnet.save_cnn(model, args.model_out)
        last = model.history[-1] if model.history else None
        acc = convnet.accuracy(model, examples)
        print(f"kind=cnn\taccuracy_all={acc:.4f}"
              f"\ttrain_accuracy={_fmt(last.train_accuracy if last else None, 4)}"
              f"\teval_accuracy={_fmt(last.eval_accuracy if last else None, 4)}"
              f"\tepochs={len(model.history)}")
    return EXIT_OK


def _load_model(kind, path):
    return relevance.load_logistic(path) if kind == "logistic" else convnet.load_cnn(path)


def cmd_predict(args):
    model = _load_model(args.kind, args.model)
    posts = ingest(args.input)
    predict = relevance.predict_logistic if args.kind == "logistic" else convnet.predict_cnn
    lines = [tsv_header("id", "label", "probability")]
    for p in posts:
        label, prob = predict(model, p.text)
        lines.append(f"{p.id}\t{label}\t{prob!r}")
    _emit(lines, args.output)
    return EXIT_OK


def cmd_cohort(args):
    s = settings(args)
    if not s["logistic_model"] or not s["cnn_model"]:
        raise ModelError("cohort needs both --logistic-model and --cnn-model")
    logistic = relevance.load_logistic(s["logistic_model"])
    cnn = convnet.load_cnn(s["cnn_model"])
    result = run_cohort(ingest(args.input), logistic, cnn, filter_config(s))
    write_posts(result.diagnostic, args.output)
    lines = [tsv_header("record", "key", "value")]
    lines += [f"funnel\t{k}\t{v}" for k, v in result.funnel.items()]
    lines += [f"user\t{u}\t{n}" for u, n in result.per_user.items()]
    _emit(lines, args.report)
    return EXIT_OK


def cmd_hashtags(args):
    s = settings(args)
    rows = hashtag_table(ingest(args.input), _lexicon(s), _lens(s), s["top_k"], args.sort)
    lines = [tsv_header("tag", "tweets", "users", "h_avg", "matched_tokens")]
    for r in rows:
        lines.append(f"{r.tag}\t{r.tweets}\t{r.users}\t{_fmt(r.ambient.value if r.ambient else None)}"
                     f"\t{r.ambient.matched_tokens if r.ambient else 0}")
    _emit(lines, args.output)
    return EXIT_OK


def cmd_serve(args):
    s = settings(args)
    posts = ingest(args.input)

    def ready(addr):
        print(f"serving {len(posts)} posts on {addr[0]}:{addr[1]} cap={args.cap}", file=sys.stderr, flush=True)

    sessions = feedsim.serve(posts, args.cap, s["keyword_query"], port=args.port, host=args.host,
                             throttle=args.throttle, max_sessions=args.sessions, ready=ready)
    for tally, completed in sessions:
        print(f"session\tmatching={tally.matching}\tdelivered={tally.delivered}"
              f"\twithheld={tally.withheld}\tcompleted={completed}", file=sys.stderr)
    return EXIT_OK


def cmd_consume(args):
    stats = feedsim.consume((args.host, args.port), args.output, args.limits_out)
    print(f"collected\t{stats.collected}\nlimit_sum\t{stats.limit_sum}\n"
          f"notices\t{len(stats.notices)}\nestimated_rho\t{_fmt(stats.estimated_rho)}")
    return EXIT_OK


def _read_limits(path):
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        try:
            out.append(feedsim.LimitNotice(int(parts[0]), int(parts[1])))
        except (ValueError, IndexError):
            raise DataError(f"{path}: bad limit line {line!r}") from None
    return out


def cmd_sample_rate(args):
    if (args.collected is None) == (args.posts is None):
        raise UsageError("give exactly one of --collected or --posts")
    collected = args.collected if args.collected is not None else len(ingest(args.posts))
    limits = list(args.withheld or [])
    if args.limits:
        limits += _read_limits(args.limits)
    try:
        rho = feedsim.estimate_sampling(collected, limits)
    except SamplingUndefined:
        rho = None
    print(f"collected\t{collected}\nlimit_sum\t{sum(getattr(l, 'withheld', l) for l in limits)}\n"
          f"estimated_rho\t{_fmt(rho)}")
    return EXIT_OK


def cmd_synth(args):
    seed = args.seed
    out = Path(args.output)
    if args.kind == "lexicon":
        lines = ["word\thappiness"] + [f"{w}\t{h:.2f}" for w, h in sorted(synth.DEMO_SCORES.items())]
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif args.kind == "fuzz":
        write_posts(synth.fuzz_posts(args.n, seed), out)
    elif args.kind == "days":
        write_posts(synth.planted_days(seed=seed)[0], out)
    elif args.kind == "activity":
        write_posts(synth.activity_posts(args.n, seed)[0], out)
    elif args.kind == "poisson":
        write_posts(synth.poisson_arrivals(args.n, args.rate, seed), out)
    elif args.kind == "separable":
        relevance.write_labeled(synth.separable_examples(args.n, seed), out)
    elif args.kind == "markers":
        relevance.write_labeled(synth.marker_phrase_examples(args.n, seed), out)
    elif args.kind == "cohort":
        plant = synth.cohort_corpus(args.n, seed)
        write_posts(plant.posts, out)
        relevance.write_labeled(plant.logistic_train, out.with_suffix(".logistic.jsonl"))
        relevance.write_labeled(plant.cnn_train, out.with_suffix(".cnn.jsonl"))
        print(f"expected_relevant\t{plant.expected_relevant}\n"
              f"expected_diagnostic\t{plant.expected_diagnostic}\n"
              f"expected_users\t{len(plant.expected_users)}", file=sys.stderr)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_filter_flags(p):
    p.add_argument("--drop-urls", dest="drop_urls", type=_as_bool, metavar="BOOL")
    p.add_argument("--drop-retweets", dest="drop_retweets", type=_as_bool, metavar="BOOL")
    p.add_argument("--horoscope-terms", dest="horoscope_terms", type=_as_list, metavar="T1,T2")
    p.add_argument("--langs", dest="allowed_langs", type=_as_list, metavar="L1,L2")
    _add_query_flag(p)


def _add_query_flag(p):
    p.add_argument("--query", dest="keyword_query", type=_as_list, metavar="T1,T2",
                   help="AND-required keyword tokens")


def _add_lexicon_flags(p):
    p.add_argument("--lexicon")
    p.add_argument("--word-col", dest="lexicon_word_col", type=int)
    p.add_argument("--score-col", dest="lexicon_score_col", type=int)
    p.add_argument("--lens-center", dest="lens_center", type=float)
    p.add_argument("--lens-delta", dest="lens_delta", type=float, help="negative disables the lens")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tweetsift", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"tweetsift {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sift", parents=[common], help="apply URL/retweet/horoscope/language/query filters")
    p.add_argument("input")
    p.add_argument("output")
    _add_filter_flags(p)
    p.set_defaults(func=cmd_sift)

    p = sub.add_parser("activity", parents=[common], help="posts-per-user histogram")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--threshold", type=int, default=10)
    p.set_defaults(func=cmd_activity)

    p = sub.add_parser("happiness", parents=[common], help="average happiness time series (TSV)")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--bin", choices=("day", "month"))
    _add_lexicon_flags(p)
    p.set_defaults(func=cmd_happiness)

    p = sub.add_parser("shift", parents=[common], help="word shift between two corpora")
    p.add_argument("ref")
    p.add_argument("comp")
    p.add_argument("--top-n", type=int, default=50)
    p.add_argument("--svg", help="also write an SVG chart here")
    _add_lexicon_flags(p)
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("train", parents=[common], help="train a classifier from labeled JSON lines")
    p.add_argument("kind", choices=("logistic", "cnn"))
    p.add_argument("labeled")
    p.add_argument("model_out")
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--alpha", help="logistic: related:unrelated training ratio, e.g. 1:10")
    p.add_argument("--l2", type=float, default=1e-3, help="logistic: L2 penalty")
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--filter-widths", default="3,4,5")
    p.add_argument("--filters", type=int, default=64, help="cnn: filters per width")
    p.add_argument("--dropout-keep", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify posts with a saved model")
    p.add_argument("kind", choices=("logistic", "cnn"))
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cohort", parents=[common], help="filters, then relevance, then diagnostic CNN")
    p.add_argument("input")
    p.add_argument("output", help="cohort posts (JSON lines)")
    p.add_argument("--logistic-model", dest="logistic_model")
    p.add_argument("--cnn-model", dest="cnn_model")
    p.add_argument("--report", help="funnel report TSV (default stdout)")
    _add_filter_flags(p)
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("hashtags", parents=[common], help="top hashtags with ambient happiness")
    p.add_argument("input")
    p.add_argument("-o", "--output")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--sort", choices=("frequency", "happiness"), default="frequency")
    _add_lexicon_flags(p)
    p.set_defaults(func=cmd_hashtags)

    p = sub.add_parser("serve", parents=[common], help="replay posts through a rate-capped feed")
    p.add_argument("input")
    p.add_argument("--cap", type=int, required=True, help="posts per second")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--throttle", type=float, help="real seconds per virtual second")
    p.add_argument("--sessions", type=int, help="exit after this many clients")
    _add_query_flag(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("consume", help="read a feed to completion")
    p.add_argument("output")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--limits-out", help="append limit notices here as TSV")
    p.set_defaults(func=cmd_consume)

    p = sub.add_parser("sample-rate", help="sampling proportion from limit counts")
    p.add_argument("--collected", type=int)
    p.add_argument("--posts", help="count collected posts from this file")
    p.add_argument("--limits", help="TSV of timestamp, withheld")
    p.add_argument("--withheld", type=int, nargs="*")
    p.set_defaults(func=cmd_sample_rate)

    p = sub.add_parser("synth", help="write a seeded synthetic corpus")
    p.add_argument("kind", choices=("lexicon", "fuzz", "days", "activity", "poisson",
                                    "separable", "markers", "cohort"))
    p.add_argument("output")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-n", type=int, default=1000)
    p.add_argument("--rate", type=float, default=50.0)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tweetsift: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelError as exc:
        print(f"tweetsift: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (DataError, FeedError, NoCoverage, OSError, ValueError) as exc:
        print(f"tweetsift: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
