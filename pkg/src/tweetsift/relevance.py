"""Stage-one relevance sifter: tf-idf features and L2 logistic regression."""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import modelio
from .corpus import tokenize
from .errors import (
    EmptyCorpus,
    MalformedRecord,
    MissingField,
    ModelFormatError,
    NonFiniteLoss,
    SingleClass,
)

log = logging.getLogger(__name__)

RELEVANT = 1
UNRELATED = 0


@dataclass(frozen=True)
class LabeledExample:
    text: str
    label: int  # 1 positive class, 0 negative

    def __post_init__(self):
        if not self.text:
            raise ValueError("labeled example text must be nonempty")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass
class TfIdfVectorizer:
    vocabulary: dict[str, int]
    idf: np.ndarray
    doc_count: int

    def transform(self, doc) -> sp.csr_matrix:
        return transform(self, doc)

    def transform_many(self, docs) -> sp.csr_matrix:
        return transform_many(self, docs)


def fit_vectorizer(docs) -> TfIdfVectorizer:
    """Vocabulary and smoothed idf, ``ln((1 + N) / (1 + df)) + 1``."""
    docs = list(docs)
    if not any(docs):
        raise EmptyCorpus("need at least one nonempty document")
    df: Counter = Counter()
    for doc in docs:
        df.update(set(doc))
    vocab = {tok: i for i, tok in enumerate(sorted(df))}
    n = len(docs)
    idf = np.array([math.log((1 + n) / (1 + df[t])) + 1.0 for t in sorted(df)])
    return TfIdfVectorizer(vocab, idf, n)


def transform_many(v: TfIdfVectorizer, docs) -> sp.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in docs:
        counts = Counter(v.vocabulary[t] for t in doc if t in v.vocabulary)
        cols = sorted(counts)
        row = np.array([counts[c] * v.idf[c] for c in cols], dtype=np.float64)
        norm = np.sqrt(np.dot(row, row))
        if norm > 0:
            row = row / norm
        indices.extend(cols)
        data.extend(row.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix((np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64), indptr),
                         shape=(len(indptr) - 1, len(v.vocabulary)))


def transform(v: TfIdfVectorizer, doc) -> sp.csr_matrix:
    """L2-normalized raw-count tf-idf row (1 x |V|); zero row if no known tokens."""
    return transform_many(v, [doc])


@dataclass
class TfIdfLogisticModel:
    vectorizer: TfIdfVectorizer
    weights: np.ndarray
    bias: float
    l2_lambda: float
    train_ratio_alpha: tuple[int, int] | None = None
    hyper: dict = field(default_factory=dict)
    history: list[float] = field(default_factory=list, repr=False)

    def predict_proba_many(self, texts) -> np.ndarray:
        X = self.vectorizer.transform_many(tokenize(t) for t in texts)
        return _sigmoid(X @ self.weights + self.bias)

    def predict(self, text: str):
        return predict_logistic(self, text)


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def loss_and_grad(w: np.ndarray, b: float, X, y: np.ndarray, lam: float):
    """Mean cross-entropy plus (lam/2)||w||^2 and its gradient (bias unregularized)."""
    z = X @ w + b
    # log(1 + e^z) - y z, evaluated stably
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * float(w @ w)
    r = (_sigmoid(z) - y) / len(y)
    gw = X.T @ r + lam * w
    gb = float(np.sum(r))
    return float(loss), np.asarray(gw).ravel(), gb


def subsample_ratio(labels, alpha, rng) -> np.ndarray:
    """Indices that realise the related:unrelated ratio ``alpha`` by
    dropping members of whichever class is in excess. Original order kept."""
    labels = np.asarray(labels)
    pos = np.flatnonzero(labels == RELEVANT)
    neg = np.flatnonzero(labels == UNRELATED)
    a, b = alpha
    if a <= 0 or b <= 0:
        raise ValueError(f"alpha must be a positive ratio, got {alpha}")
    if len(neg) * a >= len(pos) * b:
        keep_pos = pos
        n_neg = max(1, int(round(len(pos) * b / a)))
        keep_neg = rng.choice(neg, size=min(n_neg, len(neg)), replace=False)
    else:
        keep_neg = neg
        n_pos = max(1, int(round(len(neg) * a / b)))
        keep_pos = rng.choice(pos, size=min(n_pos, len(pos)), replace=False)
    return np.sort(np.concatenate([keep_pos, keep_neg]))


def train_logistic(examples, alpha=None, l2_lambda: float = 1e-3, lr: float = 0.1,
                   epochs: int = 500, seed: int = 0, tol: float = 1e-9) -> TfIdfLogisticModel:
    """Fit the relevance classifier by full-batch gradient descent.

    ``alpha`` is an optional (related, unrelated) pair such as ``(1, 10)``;
    when given, the majority class is subsampled with a generator seeded by
    ``seed`` before the vocabulary is built. Training stops early once the
    loss changes by less than ``tol``.
    """
    examples = list(examples)
    labels = np.array([e.label for e in examples], dtype=np.int64)
    if len(set(labels.tolist())) < 2:
        raise SingleClass("training data needs both relevant and unrelated examples")
    rng = np.random.default_rng(seed)
    if alpha is not None:
        idx = subsample_ratio(labels, alpha, rng)
        examples = [examples[i] for i in idx]
        labels = labels[idx]
    docs = [tokenize(e.text) for e in examples]
    vec = fit_vectorizer(docs)
    X = vec.transform_many(docs)
    y = labels.astype(np.float64)

    w = np.zeros(len(vec.vocabulary))
    b = 0.0
    history = []
    prev = None
    for epoch in range(epochs):
        loss, gw, gb = loss_and_grad(w, b, X, y, l2_lambda)
        if not math.isfinite(loss):
            raise NonFiniteLoss(f"loss became {loss} at epoch {epoch}; lower the learning rate")
        history.append(loss)
        if prev is not None and abs(prev - loss) < tol:
            break
        prev = loss
        w = w - lr * gw
        b = b - lr * gb
    else:
        if epochs:
            loss, _, _ = loss_and_grad(w, b, X, y, l2_lambda)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} after training; lower the learning rate")
            history.append(loss)
    log.debug("logistic training stopped after %d loss evaluations", len(history))
    hyper = {"lr": lr, "epochs": epochs, "seed": seed, "tol": tol, "n_train": len(examples)}
    return TfIdfLogisticModel(vec, w, b, l2_lambda, tuple(alpha) if alpha else None, hyper, history)


def predict_logistic(model: TfIdfLogisticModel, text: str) -> tuple[int, float]:
    """(label, probability); probability >= 0.5 counts as relevant."""
    x = transform(model.vectorizer, tokenize(text))
    p = float(_sigmoid(x @ model.weights + model.bias)[0])
    return (RELEVANT if p >= 0.5 else UNRELATED), p


def accuracy(model, examples) -> float:
    examples = list(examples)
    probs = model.predict_proba_many(e.text for e in examples)
    pred = (probs >= 0.5).astype(int)
    return float(np.mean(pred == np.array([e.label for e in examples])))


# -- persistence -------------------------------------------------------------

def to_modelfile(model: TfIdfLogisticModel) -> modelio.ModelFile:
    vocab = sorted(model.vectorizer.vocabulary, key=model.vectorizer.vocabulary.get)
    meta = {
        "doc_count": model.vectorizer.doc_count,
        "l2_lambda": model.l2_lambda,
        "alpha": list(model.train_ratio_alpha) if model.train_ratio_alpha else None,
        "bias": model.bias,
        "features": "tf=raw count; idf=ln((1+N)/(1+df))+1; l2-normalized",
        "optimizer": "full-batch gradient descent",
        **{f"hyper_{k}": v for k, v in model.hyper.items()},
    }
    return modelio.ModelFile("logistic", meta, vocab,
                             {"idf": model.vectorizer.idf, "weights": model.weights})


def save_logistic(model: TfIdfLogisticModel, path) -> None:
    modelio.save(to_modelfile(model), path)


def load_logistic(path) -> TfIdfLogisticModel:
    mf = modelio.load(path)
    if mf.kind != "logistic":
        raise ModelFormatError(f"{path}: expected a logistic model, found {mf.kind!r}")
    try:
        vec = TfIdfVectorizer({t: i for i, t in enumerate(mf.vocab)}, mf.arrays["idf"], mf.meta["doc_count"])
        weights = mf.arrays["weights"]
        bias = float(mf.meta["bias"])
        lam = float(mf.meta["l2_lambda"])
    except KeyError as exc:
        raise ModelFormatError(f"{path}: missing {exc}") from None
    if weights.shape != (len(mf.vocab),) or vec.idf.shape != (len(mf.vocab),):
        raise ModelFormatError(f"{path}: parameter shapes do not match vocabulary")
    alpha = tuple(mf.meta["alpha"]) if mf.meta.get("alpha") else None
    hyper = {k[len("hyper_"):]: v for k, v in mf.meta.items() if k.startswith("hyper_")}
    return TfIdfLogisticModel(vec, weights, bias, lam, alpha, hyper)


# -- labeled data files ------------------------------------------------------

def read_labeled(path) -> list[LabeledExample]:
    """JSON lines with ``text`` and ``label`` (0/1 or true/false)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(lineno, f"invalid JSON ({exc.msg})") from None
            for name in ("text", "label"):
                if name not in rec:
                    raise MissingField(lineno, name)
            label = rec["label"]
            if label not in (0, 1) or not isinstance(label, (int, bool)):
                raise MalformedRecord(lineno, f"label must be 0/1, got {label!r}")
            if not isinstance(rec["text"], str) or not rec["text"]:
                raise MalformedRecord(lineno, "text must be a nonempty string")
            out.append(LabeledExample(rec["text"], int(label)))
    return out


def write_labeled(examples, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in examples:
            fh.write(json.dumps({"text": e.text, "label": e.label}, ensure_ascii=False) + "\n")
