"""Stage-two diagnostic classifier: a small convolutional sentence model in numpy.

Architecture: embedding lookup, one bank of 1-D valid convolutions per
filter width, ReLU, max-over-time pooling, concatenation, inverted dropout
(training only), affine layer and a two-way softmax over
``(diagnostic, other)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import modelio
from .corpus import tokenize
from .errors import ModelFormatError, NonFiniteLoss, SingleClass

log = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"
PAD_ID = 0
UNK_ID = 1

DIAGNOSTIC = 1
OTHER = 0


@dataclass(frozen=True)
class CnnHyper:
    embed_dim: int = 64
    filter_widths: tuple[int, ...] = (3, 4, 5)
    filters_per_width: int = 64
    dropout_keep: float = 0.5
    batch_size: int = 32
    lr: float = 1e-3
    epochs: int = 10
    max_len: int = 0          # 0: derive from the training data
    seed: int = 0
    eval_fraction: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "filter_widths", tuple(int(k) for k in self.filter_widths))
        if min(self.embed_dim, self.filters_per_width, self.batch_size) < 1 or not self.filter_widths:
            raise ValueError("embed_dim, filters_per_width, batch_size and filter_widths must be positive")
        if min(self.filter_widths) < 1:
            raise ValueError("filter widths must be positive")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ValueError("dropout_keep must be in (0, 1]")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.max_len and self.max_len < max(self.filter_widths):
            raise ValueError("max_len must be at least the widest filter")


@dataclass
class EpochStats:
    epoch: int
    loss: float
    train_accuracy: float
    eval_accuracy: float | None


@dataclass
class CnnModel:
    vocabulary: dict[str, int]
    params: dict[str, np.ndarray]
    hyper: CnnHyper
    history: list[EpochStats] = field(default_factory=list, repr=False)

    @property
    def embeddings(self):
        return self.params["embed"]

    @property
    def fc_weights(self):
        return self.params["fc_w"]

    def encode(self, tokens) -> np.ndarray:
        ids = [self.vocabulary.get(t, UNK_ID) for t in tokens][: self.hyper.max_len]
        ids += [PAD_ID] * (self.hyper.max_len - len(ids))
        return np.array(ids, dtype=np.int64)

    def encode_texts(self, texts) -> np.ndarray:
        rows = [self.encode(tokenize(t)) for t in texts]
        if not rows:
            return np.zeros((0, self.hyper.max_len), dtype=np.int64)
        return np.stack(rows)

    def predict_proba_many(self, texts) -> np.ndarray:
        """(n, 2) array of (p_diagnostic, p_other)."""
        ids = self.encode_texts(texts)
        if not len(ids):
            return np.zeros((0, 2))
        return _forward(self.params, self.hyper, ids)[0]


def param_names(hyper: CnnHyper) -> list[str]:
    names = ["embed"]
    for k in hyper.filter_widths:
        names += [f"conv{k}_w", f"conv{k}_b"]
    return names + ["fc_w", "fc_b"]


def init_params(vocab_size: int, hyper: CnnHyper, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Embeddings U(-0.25, 0.25); filters and dense layer Glorot-uniform; zero biases."""
    D, F = hyper.embed_dim, hyper.filters_per_width
    params = {"embed": rng.uniform(-0.25, 0.25, size=(vocab_size, D))}
    for k in hyper.filter_widths:
        lim = math.sqrt(6.0 / (k * D + F))
        params[f"conv{k}_w"] = rng.uniform(-lim, lim, size=(F, k, D))
        params[f"conv{k}_b"] = np.zeros(F)
    total = F * len(hyper.filter_widths)
    lim = math.sqrt(6.0 / (total + 2))
    params["fc_w"] = rng.uniform(-lim, lim, size=(total, 2))
    params["fc_b"] = np.zeros(2)
    return params


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _windows(E, k):
    # (B, L, D) -> (B, T, k*D) with window position t covering tokens t..t+k-1
    w = sliding_window_view(E, k, axis=1)            # (B, T, D, k)
    B, T, D, _ = w.shape
    return np.ascontiguousarray(w.transpose(0, 1, 3, 2)).reshape(B, T, k * D)


def _forward(params, hyper: CnnHyper, ids, mask=None):
    """Batch forward pass. ``mask`` is the scaled dropout mask or None."""
    E = params["embed"][ids]
    pooled, cache = [], []
    for k in hyper.filter_widths:
        W = params[f"conv{k}_w"]
        win = _windows(E, k)
        conv = win @ W.reshape(W.shape[0], -1).T + params[f"conv{k}_b"]   # (B, T, F)
        arg = conv.argmax(axis=1)                                            # (B, F)
        peak = np.take_along_axis(conv, arg[:, None, :], axis=1)[:, 0, :]
        pooled.append(np.maximum(peak, 0.0))
        cache.append((win, arg, peak > 0))
    h = np.concatenate(pooled, axis=1)
    hd = h * mask if mask is not None else h
    probs = _softmax(hd @ params["fc_w"] + params["fc_b"])
    return probs, (ids, E, h, hd, mask, cache)


def pooled_features(model: CnnModel, tokens) -> np.ndarray:
    """Max-pooled filter responses for one input (before dropout)."""
    ids = model.encode(tokens)[None, :]
    return _forward(model.params, model.hyper, ids)[1][2][0]


def _targets(labels):
    # class index 0 is diagnostic, 1 is other
    return np.where(np.asarray(labels) == DIAGNOSTIC, 0, 1)


def _loss(probs, targets):
    p = probs[np.arange(len(targets)), targets]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def _backward(params, hyper: CnnHyper, probs, targets, cache):
    ids, E, h, hd, mask, conv_cache = cache
    B = len(targets)
    grads = {}
    dlogits = probs.copy()
    dlogits[np.arange(B), targets] -= 1.0
    dlogits /= B
    grads["fc_w"] = hd.T @ dlogits
    grads["fc_b"] = dlogits.sum(axis=0)
    dh = dlogits @ params["fc_w"].T
    if mask is not None:
        dh = dh * mask
    dE = np.zeros_like(E)
    F = hyper.filters_per_width
    for j, (k, (win, arg, active)) in enumerate(zip(hyper.filter_widths, conv_cache)):
        W = params[f"conv{k}_w"]
        dpeak = dh[:, j * F:(j + 1) * F] * active                       # (B, F)
        T = win.shape[1]
        dconv = np.zeros((B, T, F))
        np.put_along_axis(dconv, arg[:, None, :], dpeak[:, None, :], axis=1)
        grads[f"conv{k}_w"] = (dconv.reshape(B * T, F).T @ win.reshape(B * T, -1)).reshape(W.shape)
        grads[f"conv{k}_b"] = dpeak.sum(axis=0)
        dwin = (dconv @ W.reshape(F, -1)).reshape(B, T, k, -1)
        for off in range(k):
            dE[:, off:off + T, :] += dwin[:, :, off, :]
    g_embed = np.zeros_like(params["embed"])
    np.add.at(g_embed, ids, dE)
    grads["embed"] = g_embed
    return grads


def loss_and_grads(model: CnnModel, ids, labels):
    """Mean softmax cross-entropy (no dropout) and analytic gradients."""
    targets = _targets(labels)
    probs, cache = _forward(model.params, model.hyper, ids)
    return _loss(probs, targets), _backward(model.params, model.hyper, probs, targets, cache)


def cnn_forward(model: CnnModel, tokens, train_mode: bool = False, rng=None) -> tuple[float, float]:
    """(p_diagnostic, p_other) for one token list; dropout only in train mode."""
    ids = model.encode(tokens)[None, :]
    mask = None
    if train_mode and model.hyper.dropout_keep < 1.0:
        if rng is None:
            raise ValueError("train_mode forward needs an rng for the dropout mask")
        mask = _dropout_mask(rng, (1, sum_filters(model.hyper)), model.hyper.dropout_keep)
    probs = _forward(model.params, model.hyper, ids, mask)[0][0]
    return float(probs[0]), float(probs[1])


def sum_filters(hyper: CnnHyper) -> int:
    return hyper.filters_per_width * len(hyper.filter_widths)


def _dropout_mask(rng, shape, keep):
    return (rng.random(shape) < keep) / keep


def predict_cnn(model: CnnModel, text: str) -> tuple[int, float]:
    """(label, p_diagnostic). Diagnostic only if strictly more probable; ties go to other."""
    p_diag, p_other = cnn_forward(model, tokenize(text), train_mode=False)
    return (DIAGNOSTIC if p_diag > p_other else OTHER), p_diag


def build_vocabulary(token_lists) -> dict[str, int]:
    words = sorted({t for toks in token_lists for t in toks})
    vocab = {PAD: PAD_ID, UNK: UNK_ID}
    for w in words:
        vocab[w] = len(vocab)
    return vocab


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k in params:
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _accuracy(params, hyper, ids, labels, batch=256):
    if not len(ids):
        return None
    pred = []
    for s in range(0, len(ids), batch):
        probs = _forward(params, hyper, ids[s:s + batch])[0]
        pred.append(np.where(probs[:, 0] > probs[:, 1], DIAGNOSTIC, OTHER))
    return float(np.mean(np.concatenate(pred) == labels))


def train_cnn(examples, hyper: CnnHyper = CnnHyper()) -> CnnModel:
    """Train with Adam on mean cross-entropy.

    One generator seeded with ``hyper.seed`` drives, in order: the
    train/eval split, parameter initialisation, per-epoch shuffles and
    dropout masks. Identical inputs therefore give identical parameters.
    """
    examples = list(examples)
    labels = np.array([e.label for e in examples], dtype=np.int64)
    if len(set(labels.tolist())) < 2:
        raise SingleClass("training data needs both diagnostic and other examples")
    rng = np.random.default_rng(hyper.seed)
    order = rng.permutation(len(examples))
    n_eval = int(round(len(examples) * hyper.eval_fraction))
    eval_idx, train_idx = np.sort(order[:n_eval]), np.sort(order[n_eval:])

    tokens = [tokenize(e.text) for e in examples]
    vocab = build_vocabulary(tokens[i] for i in train_idx)
    if not hyper.max_len:
        longest = max((len(tokens[i]) for i in train_idx), default=0)
        hyper = replace(hyper, max_len=max(longest, max(hyper.filter_widths)))
    model = CnnModel(vocab, init_params(len(vocab), hyper, rng), hyper)
    ids = np.stack([model.encode(t) for t in tokens])
    X_tr, y_tr = ids[train_idx], labels[train_idx]
    X_ev, y_ev = ids[eval_idx], labels[eval_idx]
    t_tr = _targets(y_tr)

    opt = _Adam(model.params, hyper.lr)
    for epoch in range(hyper.epochs):
        perm = rng.permutation(len(X_tr))
        losses = []
        for s in range(0, len(perm), hyper.batch_size):
            b = perm[s:s + hyper.batch_size]
            mask = None
            if hyper.dropout_keep < 1.0:
                mask = _dropout_mask(rng, (len(b), sum_filters(hyper)), hyper.dropout_keep)
            probs, cache = _forward(model.params, hyper, X_tr[b], mask)
            loss = _loss(probs, t_tr[b])
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} in epoch {epoch}")
            losses.append(loss)
            opt.step(model.params, _backward(model.params, hyper, probs, t_tr[b], cache))
        stats = EpochStats(epoch + 1, float(np.mean(losses)),
                           _accuracy(model.params, hyper, X_tr, y_tr),
                           _accuracy(model.params, hyper, X_ev, y_ev))
        model.history.append(stats)
        log.info("epoch %d loss %.4f train acc %.4f eval acc %s", stats.epoch, stats.loss,
                 stats.train_accuracy, "n/a" if stats.eval_accuracy is None else f"{stats.eval_accuracy:.4f}")
    return model


def accuracy(model: CnnModel, examples) -> float:
    examples = list(examples)
    ids = model.encode_texts(e.text for e in examples)
    return _accuracy(model.params, model.hyper, ids, np.array([e.label for e in examples]))


def grad_check(model: CnnModel, examples, epsilon: float = 1e-5, n_samples: int = 100,
               seed: int = 0, gradient_fn=None, floor: float = 1e-6) -> float:
    """Largest relative error between analytic and central-difference gradients.

    Samples ``n_samples`` parameters among those the batch can influence
    (embedding rows of tokens in the batch plus every conv/dense weight).
    Relative error is ``|a - n| / max(|a|, |n|, floor)``; the floor keeps
    float roundoff on near-zero gradients from dominating. ``gradient_fn``
    replaces the analytic gradient, which lets tests confirm the check fails
    on a broken gradient.
    """
    examples = list(examples)
    ids = model.encode_texts(e.text for e in examples)
    labels = np.array([e.label for e in examples])
    params = {k: v.copy() for k, v in model.params.items()}
    probe = CnnModel(model.vocabulary, params, model.hyper)
    grads = (gradient_fn or (lambda m, i, y: loss_and_grads(m, i, y)[1]))(probe, ids, labels)

    D = model.hyper.embed_dim
    rows = np.unique(ids)
    pool = [("embed", int(r) * D + c) for r in rows for c in range(D)]
    for name in param_names(model.hyper)[1:]:
        pool += [(name, i) for i in range(params[name].size)]
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(pool), size=min(n_samples, len(pool)), replace=False)
    targets = _targets(labels)

    worst = 0.0
    for p in np.sort(picks):
        name, i = pool[p]
        flat = params[name].reshape(-1)
        orig = flat[i]
        flat[i] = orig + epsilon
        up = _loss(_forward(params, model.hyper, ids)[0], targets)
        flat[i] = orig - epsilon
        down = _loss(_forward(params, model.hyper, ids)[0], targets)
        flat[i] = orig
        numeric = (up - down) / (2 * epsilon)
        analytic = float(grads[name].reshape(-1)[i])
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
        worst = max(worst, err)
    return worst


# -- persistence -------------------------------------------------------------

def to_modelfile(model: CnnModel) -> modelio.ModelFile:
    vocab = sorted(model.vocabulary, key=model.vocabulary.get)
    meta = {f"hyper_{k}": (list(v) if isinstance(v, tuple) else v) for k, v in asdict(model.hyper).items()}
    meta["classes"] = ["diagnostic", "other"]
    meta["architecture"] = "embed-conv-relu-maxpool-dropout-affine-softmax"
    meta["optimizer"] = "adam(b1=0.9,b2=0.999,eps=1e-8)"
    arrays = {name: model.params[name] for name in param_names(model.hyper)}
    return modelio.ModelFile("cnn", meta, vocab, arrays)


def save_cnn(model: CnnModel, path) -> None:
    modelio.save(to_modelfile(model), path)


def load_cnn(path) -> CnnModel:
    mf = modelio.load(path)
    if mf.kind != "cnn":
        raise ModelFormatError(f"{path}: expected a cnn model, found {mf.kind!r}")
    try:
        hyper = CnnHyper(**{k[len("hyper_"):]: v for k, v in mf.meta.items() if k.startswith("hyper_")})
        params = {name: mf.arrays[name] for name in param_names(hyper)}
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
    if mf.vocab[:2] != [PAD, UNK]:
        raise ModelFormatError(f"{path}: vocabulary must start with {PAD} and {UNK}")
    V, D, F = len(mf.vocab), hyper.embed_dim, hyper.filters_per_width
    expected = {"embed": (V, D), "fc_w": (F * len(hyper.filter_widths), 2), "fc_b": (2,)}
    for k in hyper.filter_widths:
        expected[f"conv{k}_w"] = (F, k, D)
        expected[f"conv{k}_b"] = (F,)
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ModelFormatError(f"{path}: {name} has shape {params[name].shape}, expected {shape}")
    if not all(np.all(np.isfinite(v)) for v in params.values()):
        raise ModelFormatError(f"{path}: non-finite parameter values")
    return CnnModel({t: i for i, t in enumerate(mf.vocab)}, params, hyper)
