"""Windowed neural tagger for part-of-speech and LOC/ORG entities.

Each position is scored from the concatenated embeddings of a fixed-width
window: s = M2 * hardtanh(M1 * x). Two output blocks share the trunk, one
over the universal part-of-speech inventory and one over BIO LOC/ORG tags.
Training is minibatch SGD on the summed per-head cross-entropies with
hand-written backpropagation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DivergenceError, FormatError, ModelError, ShapeError
from .text import (
    BioTag, ENTITY_TAGS, EventClass, POS_TAGS, TaggedSentence,
)

MODEL_MAGIC = "URBANPULSE-CNN-v1"

PADDING_WORD = "<pad>"
UNKNOWN_WORD = "<unk>"


def hardtanh(x):
    """Clip to [-1, 1]; identity inside the interval."""
    return np.clip(x, -1.0, 1.0)


def hardtanh_grad(x):
    """Derivative of hardtanh: one on [-1, 1] (inclusive), zero outside."""
    x = np.asarray(x)
    return ((x >= -1.0) & (x <= 1.0)).astype(float)


@dataclass
class CnnModel:
    vocab: dict[str, int]
    embed: np.ndarray        # (V, D)
    m1: np.ndarray           # (H, K*D)
    m2: np.ndarray           # (n_outputs, H)
    window: int              # K, odd
    pos_tags: tuple[str, ...] = POS_TAGS
    entity_tags: tuple[str, ...] = ENTITY_TAGS

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ShapeError(f"window must be odd and positive, got {self.window}")
        for w in (PADDING_WORD, UNKNOWN_WORD):
            if w not in self.vocab:
                raise ModelError(f"vocabulary is missing the {w} sentinel")
        v, d = self.embed.shape
        if v != len(self.vocab):
            raise ShapeError(f"{v} embedding rows for {len(self.vocab)} words")
        if self.m1.shape[1] != self.window * d:
            raise ShapeError(
                f"m1 expects {self.m1.shape[1]} inputs, window gives {self.window * d}")
        n_out = len(self.pos_tags) + len(self.entity_tags)
        if self.m2.shape != (n_out, self.m1.shape[0]):
            raise ShapeError(
                f"m2 shape {self.m2.shape} must be ({n_out}, {self.m1.shape[0]})")

    @property
    def dim(self) -> int:
        return self.embed.shape[1]

    @property
    def n_pos(self) -> int:
        return len(self.pos_tags)


def lookup(model: CnnModel, word: str) -> np.ndarray:
    """Embedding of a word; unseen words share the unknown-word row."""
    idx = model.vocab.get(str(word), model.vocab[UNKNOWN_WORD])
    return model.embed[idx]


def window_indices(model: CnnModel, tokens: Sequence[str], i: int) -> np.ndarray:
    """Vocabulary rows for the window centred at position i, padded at edges."""
    if not 0 <= i < len(tokens):
        raise ShapeError(f"position {i} outside sentence of length {len(tokens)}")
    half = model.window // 2
    pad = model.vocab[PADDING_WORD]
    unk = model.vocab[UNKNOWN_WORD]
    out = np.empty(model.window, dtype=np.intp)
    for k, j in enumerate(range(i - half, i + half + 1)):
        if 0 <= j < len(tokens):
            out[k] = model.vocab.get(str(tokens[j]), unk)
        else:
            out[k] = pad
    return out


def window_vector(model: CnnModel, tokens: Sequence[str], i: int) -> np.ndarray:
    return model.embed[window_indices(model, tokens, i)].reshape(-1)


def scores(model: CnnModel, tokens: Sequence[str], i: int) -> np.ndarray:
    """Raw scores for every output tag at one position."""
    x = window_vector(model, tokens, i)
    return model.m2 @ hardtanh(model.m1 @ x)


def predict(model: CnnModel, tokens: Sequence[str]
            ) -> tuple[list[str], list[str]]:
    """Per-token part-of-speech and entity tags (argmax per head)."""
    pos_out, ent_out = [], []
    n_pos = model.n_pos
    for i in range(len(tokens)):
        s = scores(model, tokens, i)
        pos_out.append(model.pos_tags[int(np.argmax(s[:n_pos]))])
        if model.entity_tags:
            ent_out.append(model.entity_tags[int(np.argmax(s[n_pos:]))])
    return pos_out, ent_out


def entity_spans(entity_labels: Sequence[str], kind: str) -> list[tuple[int, int]]:
    """Decode B-/I- runs of one entity kind; orphan I opens a new span."""
    spans: list[tuple[int, int]] = []
    start = None
    for i, label in enumerate(entity_labels):
        if label == f"B-{kind}" or (label == f"I-{kind}" and start is None):
            if start is not None:
                spans.append((start, i))
            start = i
        elif label == f"I-{kind}":
            continue
        else:
            if start is not None:
                spans.append((start, i))
                start = None
    if start is not None:
        spans.append((start, len(entity_labels)))
    return spans


def loc_spans(model: CnnModel, tokens: Sequence[str]) -> list[tuple[int, int]]:
    if not model.entity_tags:
        return []
    _, ents = predict(model, tokens)
    return entity_spans(ents, "LOC")


def boost_location(crf_tags: Sequence[BioTag],
                   spans: Iterable[tuple[int, int]]) -> list[BioTag]:
    """Fill outside positions covered by LOC spans with Location tags.

    Positions already tagged by the CRF are never overwritten, so the
    result can only add Location predictions; each maximal filled run is
    opened with B-Location to keep the sequence valid BIO.
    """
    out = list(crf_tags)
    for start, end in spans:
        if start < 0 or end > len(out):
            raise ShapeError(f"span [{start}, {end}) outside tag sequence")
        run_open = False
        for i in range(start, end):
            if out[i].is_outside:
                prefix = "I" if run_open else "B"
                out[i] = BioTag(prefix, EventClass.LOCATION)
                run_open = True
            else:
                run_open = False
    return out


@dataclass(frozen=True)
class SyntacticView:
    """Pooled grammatical evidence for one sentence.

    A normalized histogram of predicted part-of-speech tags plus two flags
    for the presence of location and organization entities.
    """

    pos_histogram: np.ndarray   # (17,)
    has_location: float
    has_organization: float

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([
            self.pos_histogram, [self.has_location, self.has_organization]])

    @staticmethod
    def dim() -> int:
        return len(POS_TAGS) + 2


def syntactic_view(model: CnnModel, tokens: Sequence[str]) -> SyntacticView:
    if len(tokens) == 0:
        raise ShapeError("cannot pool an empty sentence")
    pos, ents = predict(model, tokens)
    hist = np.zeros(len(model.pos_tags))
    index = {t: i for i, t in enumerate(model.pos_tags)}
    for p in pos:
        hist[index[p]] += 1.0
    has_loc = 1.0 if entity_spans(ents, "LOC") else 0.0
    has_org = 1.0 if entity_spans(ents, "ORG") else 0.0
    return SyntacticView(pos_histogram=hist / len(tokens),
                         has_location=has_loc, has_organization=has_org)


@dataclass
class CnnTrainConfig:
    dim: int = 16
    window: int = 5
    hidden: int = 32
    learning_rate: float = 0.1
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    shifted = s - s.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class _Batch:
    windows: np.ndarray      # (B, K) vocabulary rows
    pos_labels: np.ndarray   # (B,) indices, -1 when absent
    ent_labels: np.ndarray   # (B,) indices, -1 when absent


def _forward_batch(model: CnnModel, batch: _Batch):
    x = model.embed[batch.windows].reshape(len(batch.windows), -1)
    a = x @ model.m1.T
    h = hardtanh(a)
    s = h @ model.m2.T
    return x, a, h, s


def batch_loss_and_gradients(model: CnnModel, batch: _Batch
                             ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch's labelled heads, with gradients.

    Each labelled head at each position contributes one term; gradients
    cover the embedding table and both linear maps.
    """
    x, a, h, s = _forward_batch(model, batch)
    n_pos = model.n_pos
    ds = np.zeros_like(s)
    loss = 0.0
    n_terms = 0

    pos_mask = batch.pos_labels >= 0
    if pos_mask.any():
        rows = np.where(pos_mask)[0]
        p = _softmax_rows(s[rows, :n_pos])
        labels = batch.pos_labels[rows]
        loss -= float(np.log(p[np.arange(len(rows)), labels]).sum())
        grad = p
        grad[np.arange(len(rows)), labels] -= 1.0
        ds[rows, :n_pos] = grad
        n_terms += len(rows)

    ent_mask = batch.ent_labels >= 0
    if ent_mask.any() and model.entity_tags:
        rows = np.where(ent_mask)[0]
        p = _softmax_rows(s[rows, n_pos:])
        labels = batch.ent_labels[rows]
        loss -= float(np.log(p[np.arange(len(rows)), labels]).sum())
        grad = p
        grad[np.arange(len(rows)), labels] -= 1.0
        ds[rows, n_pos:] = grad
        n_terms += len(rows)

    if n_terms == 0:
        raise ShapeError("batch has no labelled positions")
    loss /= n_terms
    ds /= n_terms

    dm2 = ds.T @ h
    dh = ds @ model.m2
    da = dh * hardtanh_grad(a)
    dm1 = da.T @ x
    dx = da @ model.m1
    dembed = np.zeros_like(model.embed)
    d = model.dim
    dx_windows = dx.reshape(len(batch.windows), model.window, d)
    np.add.at(dembed, batch.windows, dx_windows)
    return loss, {"embed": dembed, "m1": dm1, "m2": dm2}


def make_batch(model: CnnModel, items: Sequence[tuple[Sequence[str], int, str | None, str | None]]) -> _Batch:
    """Assemble (tokens, position, pos_label, entity_label) items for training."""
    pos_index = {t: i for i, t in enumerate(model.pos_tags)}
    ent_index = {t: i for i, t in enumerate(model.entity_tags)}
    windows = np.stack([window_indices(model, toks, i) for toks, i, _, _ in items])
    pos_labels = np.array(
        [pos_index[p] if p is not None else -1 for _, _, p, _ in items], dtype=np.intp)
    ent_labels = np.array(
        [ent_index[e] if e is not None else -1 for _, _, _, e in items], dtype=np.intp)
    return _Batch(windows, pos_labels, ent_labels)


def build_vocab(sentences: Iterable[TaggedSentence]) -> dict[str, int]:
    vocab = {PADDING_WORD: 0, UNKNOWN_WORD: 1}
    for sent in sentences:
        for tok in sent.tokens:
            word = str(tok)
            if word not in vocab:
                vocab[word] = len(vocab)
    return vocab


def train(sentences: Sequence[TaggedSentence],
          config: CnnTrainConfig | None = None) -> CnnModel:
    """Fit the tagger with minibatch SGD; deterministic for a fixed seed."""
    if config is None:
        config = CnnTrainConfig()
    if not sentences:
        raise ShapeError("training corpus is empty")
    rng = np.random.default_rng(config.seed)
    vocab = build_vocab(sentences)
    d, k, hdim = config.dim, config.window, config.hidden
    n_out = len(POS_TAGS) + len(ENTITY_TAGS)
    model = CnnModel(
        vocab=vocab,
        embed=rng.normal(0.0, 0.1, size=(len(vocab), d)),
        m1=rng.normal(0.0, 1.0 / np.sqrt(k * d), size=(hdim, k * d)),
        m2=rng.normal(0.0, 1.0 / np.sqrt(hdim), size=(n_out, hdim)),
        window=k,
    )

    items = []
    for sent in sentences:
        for i in range(len(sent.tokens)):
            ent = sent.entities[i] if sent.entities is not None else None
            items.append((sent.tokens, i, sent.pos[i], ent))

    order = np.arange(len(items))
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        for lo in range(0, len(order), config.batch_size):
            chunk = [items[j] for j in order[lo:lo + config.batch_size]]
            batch = make_batch(model, chunk)
            loss, grads = batch_loss_and_gradients(model, batch)
            if not np.isfinite(loss):
                raise DivergenceError("non-finite loss", epoch=epoch)
            model.embed -= config.learning_rate * grads["embed"]
            model.m1 -= config.learning_rate * grads["m1"]
            model.m2 -= config.learning_rate * grads["m2"]
    return model


def pos_accuracy(model: CnnModel, sentences: Iterable[TaggedSentence]) -> float:
    correct = total = 0
    for sent in sentences:
        pos, _ = predict(model, sent.tokens)
        for got, want in zip(pos, sent.pos):
            correct += got == want
            total += 1
    if total == 0:
        raise ShapeError("no labelled tokens to evaluate")
    return correct / total


def save(model: CnnModel, path: str | Path) -> None:
    payload = {
        "format": MODEL_MAGIC,
        "vocab": model.vocab,
        "window": model.window,
        "pos_tags": list(model.pos_tags),
        "entity_tags": list(model.entity_tags),
        "embed": model.embed.tolist(),
        "m1": model.m1.tolist(),
        "m2": model.m2.tolist(),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load(path: str | Path) -> CnnModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a JSON model file: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != MODEL_MAGIC:
        raise ModelError(f"{path}: expected a {MODEL_MAGIC} model file")
    try:
        return CnnModel(
            vocab={str(k): int(v) for k, v in payload["vocab"].items()},
            embed=np.array(payload["embed"], dtype=float),
            m1=np.array(payload["m1"], dtype=float),
            m2=np.array(payload["m2"], dtype=float),
            window=int(payload["window"]),
            pos_tags=tuple(payload["pos_tags"]),
            entity_tags=tuple(payload["entity_tags"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model payload: {exc}") from None
