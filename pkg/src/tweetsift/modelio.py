"""Versioned flat-text model files.

Layout::

    tweetsift-model 1
    kind <kind>
    meta <key> <json value>        (zero or more)
    vocab <n>
    <one token per line>           (n lines, index order)
    array <name> <d0,d1,...>       (zero or more blocks)
    <one row of the trailing axis per line>
    end

Floats are written with ``repr`` so a save/load cycle is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError

MAGIC = "tweetsift-model"
VERSION = 1


@dataclass
class ModelFile:
    kind: str
    meta: dict = field(default_factory=dict)
    vocab: list[str] = field(default_factory=list)
    arrays: dict[str, np.ndarray] = field(default_factory=dict)


def _rows(arr: np.ndarray):
    if arr.ndim == 0:
        yield repr(float(arr))
        return
    flat = arr.reshape(-1, arr.shape[-1]) if arr.size else arr.reshape(0, 0)
    for row in flat.tolist():
        yield " ".join(map(repr, row))


def dumps(model: ModelFile) -> str:
    out = [f"{MAGIC} {VERSION}", f"kind {model.kind}"]
    for key in sorted(model.meta):
        out.append(f"meta {key} {json.dumps(model.meta[key], sort_keys=True)}")
    out.append(f"vocab {len(model.vocab)}")
    for tok in model.vocab:
        if not tok or any(c.isspace() for c in tok):
            raise ModelFormatError(f"vocabulary token {tok!r} cannot be stored")
        out.append(tok)
    for name, arr in model.arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        out.append(f"array {name} {','.join(map(str, arr.shape))}")
        out.extend(_rows(arr))
    out.append("end")
    return "\n".join(out) + "\n"


def save(model: ModelFile, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(model))


def loads(text: str) -> ModelFile:
    lines = text.split("\n")
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise ModelFormatError("unexpected end of model file")
        pos += 1
        return lines[pos - 1]

    head = take().split()
    if len(head) != 2 or head[0] != MAGIC:
        raise ModelFormatError("not a tweetsift model file")
    if head[1] != str(VERSION):
        raise ModelFormatError(f"unsupported model format version {head[1]}")
    kind_line = take().split(" ", 1)
    if kind_line[0] != "kind" or len(kind_line) != 2:
        raise ModelFormatError("missing kind line")
    model = ModelFile(kind=kind_line[1])

    line = take()
    while line.startswith("meta "):
        _, key, value = line.split(" ", 2)
        try:
            model.meta[key] = json.loads(value)
        except json.JSONDecodeError:
            raise ModelFormatError(f"bad meta value for {key}") from None
        line = take()
    if not line.startswith("vocab "):
        raise ModelFormatError("missing vocab block")
    n = int(line.split()[1])
    model.vocab = [take() for _ in range(n)]

    line = take()
    while line.startswith("array "):
        parts = line.split()
        name = parts[1]
        shape = tuple(int(d) for d in parts[2].split(",")) if len(parts) > 2 and parts[2] else ()
        size = int(np.prod(shape)) if shape else 1
        nrows = 1 if not shape else (size // shape[-1] if shape[-1] else 0)
        values = []
        for _ in range(nrows):
            row = take()
            values.extend(float(v) for v in row.split())
        if len(values) != size:
            raise ModelFormatError(f"array {name}: expected {size} values, got {len(values)}")
        model.arrays[name] = np.array(values, dtype=np.float64).reshape(shape)
        line = take()
    if line != "end":
        raise ModelFormatError(f"unexpected line {line[:40]!r}")
    return model


def load(path) -> ModelFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from None
    try:
        return loads(text)
    except (ValueError, IndexError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from None
