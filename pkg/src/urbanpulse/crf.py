"""Linear-chain CRF entity tagger over hand-built token features.

Emissions are weights on (feature, tag) pairs; transitions form a
(T+1, T) matrix whose extra row scores the start transition. Training
maximizes the L2-regularized mean conditional log-likelihood by full-batch
gradient ascent with a backtracking step size, so the loss never increases
between accepted epochs. Decoding is Viterbi with ties broken toward the
lowest tag index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DivergenceError, FormatError, ModelError, ShapeError
from .text import (
    BioTag, EventClass, EVENT_CLASS_ORDER, PhraseMatcher, TAG_SET, Token,
    spans_from_tags, word_shape,
)

MODEL_MAGIC = "URBANPULSE-CRF-v1"

BOS = "<s>"
EOS = "</s>"


def token_features(tokens: Sequence[str], i: int,
                   matches: Sequence[tuple[EventClass, int, int]] = ()) -> list[str]:
    """Feature strings fired at one position.

    Templates: the word itself, its orthographic shape, 3-character prefix
    and suffix, the neighbouring words, and one dictionary feature per
    class whose phrase covers the position.
    """
    tok = tokens[i]
    text = str(tok)
    surface = tok.surface if isinstance(tok, Token) else text
    feats = [
        f"w={text}",
        f"shape={word_shape(surface)}",
        f"pre3={text[:3]}",
        f"suf3={text[-3:]}",
        f"prev={tokens[i - 1] if i > 0 else BOS}",
        f"next={tokens[i + 1] if i + 1 < len(tokens) else EOS}",
    ]
    for cls, start, end in matches:
        if start <= i < end:
            feat = f"dict={cls.value}"
            if feat not in feats:
                feats.append(feat)
    return feats


def sentence_features(tokens: Sequence[str],
                      matcher: PhraseMatcher | None = None) -> list[list[str]]:
    matches = matcher.find(tokens) if matcher is not None else ()
    return [token_features(tokens, i, matches) for i in range(len(tokens))]


@dataclass
class CrfModel:
    tag_set: tuple[BioTag, ...]
    feature_vocab: dict[str, int]
    emission: np.ndarray      # (n_features, n_tags)
    transition: np.ndarray    # (n_tags + 1, n_tags); last row scores the start
    l2_lambda: float = 0.0
    # attached after load/train so decoding sees dictionary features; not serialized
    matcher: PhraseMatcher | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        t = len(self.tag_set)
        if self.emission.shape != (len(self.feature_vocab), t):
            raise ShapeError(
                f"emission shape {self.emission.shape} does not match "
                f"{len(self.feature_vocab)} features x {t} tags")
        if self.transition.shape != (t + 1, t):
            raise ShapeError(
                f"transition shape {self.transition.shape} must be ({t + 1}, {t})")

    @property
    def n_tags(self) -> int:
        return len(self.tag_set)

    @property
    def tag_index(self) -> dict[BioTag, int]:
        return {t: i for i, t in enumerate(self.tag_set)}


def feature_ids(model: CrfModel, feats_per_pos: list[list[str]]) -> list[np.ndarray]:
    """Map feature strings to known vocabulary ids, dropping unknowns."""
    vocab = model.feature_vocab
    return [np.array([vocab[f] for f in feats if f in vocab], dtype=np.intp)
            for feats in feats_per_pos]


def sentence_log_potentials(model: CrfModel, tokens: Sequence[str]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-position emission scores plus the model's transition scores.

    Returns (emissions (n, T), transitions (T, T), start scores (T,)).
    Both exact scoring and Viterbi build on exactly these potentials.
    """
    if len(tokens) == 0:
        raise ShapeError("cannot score an empty sentence")
    fids = feature_ids(model, sentence_features(tokens, model.matcher))
    emit = np.zeros((len(tokens), model.n_tags))
    for i, ids in enumerate(fids):
        if ids.size:
            emit[i] = model.emission[ids].sum(axis=0)
    return emit, model.transition[:-1], model.transition[-1]


def _tag_indices(model: CrfModel, tags: Sequence[BioTag]) -> np.ndarray:
    index = model.tag_index
    try:
        return np.array([index[t] for t in tags], dtype=np.intp)
    except KeyError as exc:
        raise FormatError(f"tag {exc.args[0]} not in model tag set") from None


def log_score(model: CrfModel, tokens: Sequence[str], tags: Sequence[BioTag]) -> float:
    """Unnormalized log score of one tagging of a sentence."""
    if len(tokens) != len(tags):
        raise ShapeError(f"{len(tokens)} tokens but {len(tags)} tags")
    emit, trans, start = sentence_log_potentials(model, tokens)
    y = _tag_indices(model, tags)
    score = float(emit[np.arange(len(y)), y].sum()) + float(start[y[0]])
    if len(y) > 1:
        score += float(trans[y[:-1], y[1:]].sum())
    return score


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def _forward(emit: np.ndarray, trans: np.ndarray, start: np.ndarray) -> np.ndarray:
    n, t = emit.shape
    la = np.empty((n, t))
    la[0] = start + emit[0]
    for i in range(1, n):
        la[i] = _logsumexp(la[i - 1][:, None] + trans, axis=0) + emit[i]
    return la


def log_partition(model: CrfModel, tokens: Sequence[str]) -> float:
    """Log of the sum of exp scores over all taggings."""
    emit, trans, start = sentence_log_potentials(model, tokens)
    la = _forward(emit, trans, start)
    return float(_logsumexp(la[-1], axis=0))


def forward_backward(emit: np.ndarray, trans: np.ndarray, start: np.ndarray
                     ) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact marginals for one sentence.

    Returns (log_z, unary (n, T), pairwise (n-1, T, T)) where unary[i, t]
    is P(y_i = t | x) and pairwise[i, a, b] is P(y_i = a, y_{i+1} = b | x).
    """
    n, t = emit.shape
    la = _forward(emit, trans, start)
    lb = np.zeros((n, t))
    for i in range(n - 2, -1, -1):
        lb[i] = _logsumexp(trans + (emit[i + 1] + lb[i + 1])[None, :], axis=1)
    log_z = float(_logsumexp(la[-1], axis=0))
    unary = np.exp(la + lb - log_z)
    if n > 1:
        pair_log = (la[:-1, :, None] + trans[None, :, :]
                    + (emit[1:] + lb[1:])[:, None, :] - log_z)
        pairwise = np.exp(pair_log)
    else:
        pairwise = np.zeros((0, t, t))
    return log_z, unary, pairwise


def decode(model: CrfModel, tokens: Sequence[str]) -> list[BioTag]:
    """Viterbi decoding; score ties resolve to the lowest tag index."""
    emit, trans, start = sentence_log_potentials(model, tokens)
    n, t = emit.shape
    score = start + emit[0]
    back = np.zeros((n, t), dtype=np.intp)
    for i in range(1, n):
        cand = score[:, None] + trans
        back[i] = np.argmax(cand, axis=0)
        score = cand[back[i], np.arange(t)] + emit[i]
    path = np.empty(n, dtype=np.intp)
    path[-1] = int(np.argmax(score))
    for i in range(n - 1, 0, -1):
        path[i - 1] = back[i, path[i]]
    return [model.tag_set[j] for j in path]


@dataclass(frozen=True)
class SemanticView:
    """Pooled entity evidence for one sentence.

    class_mass holds the fraction of tokens tagged with each span class
    (outside tokens count toward the final Other slot) and sums to one;
    span_flags marks which classes appear at all, with the Other slot
    flagging the presence of untagged tokens.
    """

    class_mass: np.ndarray   # (9,)
    span_flags: np.ndarray   # (9,)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.class_mass, self.span_flags])

    @staticmethod
    def dim() -> int:
        return 2 * len(EVENT_CLASS_ORDER)


def semantic_view_from_tags(tags: Sequence[BioTag]) -> SemanticView:
    if not tags:
        raise ShapeError("cannot pool an empty tag sequence")
    order = {c: i for i, c in enumerate(EVENT_CLASS_ORDER)}
    mass = np.zeros(len(order))
    flags = np.zeros(len(order))
    for tag in tags:
        cls = EventClass.OTHER if tag.is_outside else tag.event_class
        mass[order[cls]] += 1.0
        if tag.is_outside:
            flags[order[EventClass.OTHER]] = 1.0
    for span in spans_from_tags(list(tags)):
        flags[order[span.event_class]] = 1.0
    return SemanticView(class_mass=mass / len(tags), span_flags=flags)


def semantic_view(model: CrfModel, tokens: Sequence[str]) -> SemanticView:
    return semantic_view_from_tags(decode(model, tokens))


@dataclass
class CrfTrainConfig:
    l2_lambda: float = 0.01
    learning_rate: float = 0.5
    epochs: int = 100
    tol: float = 1e-9
    seed: int = 0


class _Encoded:
    """Per-sentence tensors precomputed once before the epoch loop."""

    __slots__ = ("fids", "flat_rows", "flat_fids", "y")

    def __init__(self, fids: list[np.ndarray], y: np.ndarray):
        self.fids = fids
        self.y = y
        rows, flat = [], []
        for i, ids in enumerate(fids):
            rows.extend([i] * len(ids))
            flat.append(ids)
        self.flat_rows = np.array(rows, dtype=np.intp)
        self.flat_fids = np.concatenate(flat) if flat else np.zeros(0, dtype=np.intp)


def _emission_for(encoded: _Encoded, emission: np.ndarray, n_tags: int) -> np.ndarray:
    emit = np.zeros((len(encoded.fids), n_tags))
    np.add.at(emit, encoded.flat_rows, emission[encoded.flat_fids])
    return emit


def _corpus_loss(emission: np.ndarray, transition: np.ndarray,
                 encoded: list[_Encoded], l2_lambda: float) -> float:
    trans, start = transition[:-1], transition[-1]
    total = 0.0
    for s in encoded:
        emit = _emission_for(s, emission, transition.shape[1])
        y = s.y
        score = emit[np.arange(len(y)), y].sum() + start[y[0]]
        if len(y) > 1:
            score += trans[y[:-1], y[1:]].sum()
        la = _forward(emit, trans, start)
        total += _logsumexp(la[-1], axis=0) - score
    loss = total / len(encoded)
    loss += 0.5 * l2_lambda * (float((emission ** 2).sum())
                               + float((transition ** 2).sum()))
    return float(loss)


def _corpus_loss_and_grad(emission: np.ndarray, transition: np.ndarray,
                          encoded: list[_Encoded], l2_lambda: float
                          ) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean negative log-likelihood plus L2, with its exact gradient."""
    n_tags = transition.shape[1]
    trans, start = transition[:-1], transition[-1]
    g_emit = np.zeros_like(emission)
    g_trans = np.zeros_like(transition)
    total = 0.0
    for s in encoded:
        emit = _emission_for(s, emission, n_tags)
        y = s.y
        n = len(y)
        score = emit[np.arange(n), y].sum() + start[y[0]]
        if n > 1:
            score += trans[y[:-1], y[1:]].sum()
        log_z, unary, pairwise = forward_backward(emit, trans, start)
        total += log_z - score
        diff = -unary
        diff[np.arange(n), y] += 1.0
        np.add.at(g_emit, s.flat_fids, diff[s.flat_rows])
        g_trans[-1] += diff[0]
        if n > 1:
            g_trans[:-1] -= pairwise.sum(axis=0)
            np.add.at(g_trans, (y[:-1], y[1:]), 1.0)
    loss = total / len(encoded)
    loss += 0.5 * l2_lambda * (float((emission ** 2).sum())
                               + float((transition ** 2).sum()))
    g_emit = -g_emit / len(encoded) + l2_lambda * emission
    g_trans = -g_trans / len(encoded) + l2_lambda * transition
    return float(loss), g_emit, g_trans


def encode_sentences(model_vocab: dict[str, int], tag_set: Sequence[BioTag],
                     sentences: Sequence[tuple[Sequence[str], Sequence[BioTag]]],
                     matcher: PhraseMatcher | None = None) -> list[_Encoded]:
    tag_index = {t: i for i, t in enumerate(tag_set)}
    out = []
    for tokens, tags in sentences:
        if len(tokens) != len(tags):
            raise ShapeError(f"{len(tokens)} tokens but {len(tags)} tags")
        fids = feature_ids_from_vocab(model_vocab, sentence_features(tokens, matcher))
        try:
            y = np.array([tag_index[t] for t in tags], dtype=np.intp)
        except KeyError as exc:
            raise FormatError(f"tag {exc.args[0]} not in tag set") from None
        out.append(_Encoded(fids, y))
    return out


def feature_ids_from_vocab(vocab: dict[str, int],
                           feats_per_pos: list[list[str]]) -> list[np.ndarray]:
    return [np.array([vocab[f] for f in feats if f in vocab], dtype=np.intp)
            for feats in feats_per_pos]


def loss_and_gradients(model: CrfModel,
                       sentences: Sequence[tuple[Sequence[str], Sequence[BioTag]]],
                       l2_lambda: float | None = None
                       ) -> tuple[float, np.ndarray, np.ndarray]:
    """Training objective and its gradient at the model's current weights.

    The objective is the mean negative conditional log-likelihood over the
    given sentences plus the L2 penalty; gradients come back for the
    emission and transition arrays in that order.
    """
    lam = model.l2_lambda if l2_lambda is None else l2_lambda
    encoded = encode_sentences(model.feature_vocab, model.tag_set,
                               sentences, model.matcher)
    return _corpus_loss_and_grad(model.emission, model.transition, encoded, lam)


def corpus_loss(model: CrfModel,
                sentences: Sequence[tuple[Sequence[str], Sequence[BioTag]]],
                l2_lambda: float | None = None) -> float:
    lam = model.l2_lambda if l2_lambda is None else l2_lambda
    encoded = encode_sentences(model.feature_vocab, model.tag_set,
                               sentences, model.matcher)
    return _corpus_loss(model.emission, model.transition, encoded, lam)


def train(sentences: Sequence[tuple[Sequence[str], Sequence[BioTag]]],
          config: CrfTrainConfig | None = None,
          matcher: PhraseMatcher | None = None,
          tag_set: tuple[BioTag, ...] = TAG_SET) -> CrfModel:
    """Fit a CRF on (tokens, tags) pairs.

    Full-batch gradient descent on the regularized mean NLL; the step is
    halved until each epoch's loss does not increase, so the sequence of
    accepted losses is non-increasing. Deterministic for a fixed corpus.
    """
    if config is None:
        config = CrfTrainConfig()
    if not sentences:
        raise ShapeError("training corpus is empty")

    vocab: dict[str, int] = {}
    tag_index = {t: i for i, t in enumerate(tag_set)}
    encoded: list[_Encoded] = []
    for tokens, tags in sentences:
        if len(tokens) != len(tags):
            raise ShapeError(f"{len(tokens)} tokens but {len(tags)} tags")
        feats = sentence_features(tokens, matcher)
        for per_pos in feats:
            for f in per_pos:
                if f not in vocab:
                    vocab[f] = len(vocab)
        fids = [np.array([vocab[f] for f in per_pos], dtype=np.intp)
                for per_pos in feats]
        try:
            y = np.array([tag_index[t] for t in tags], dtype=np.intp)
        except KeyError as exc:
            raise FormatError(f"tag {exc.args[0]} not in tag set") from None
        encoded.append(_Encoded(fids, y))

    n_tags = len(tag_set)
    emission = np.zeros((len(vocab), n_tags))
    transition = np.zeros((n_tags + 1, n_tags))

    loss, g_emit, g_trans = _corpus_loss_and_grad(
        emission, transition, encoded, config.l2_lambda)
    if not np.isfinite(loss):
        raise DivergenceError("non-finite initial loss", epoch=0)

    lr = config.learning_rate
    for epoch in range(1, config.epochs + 1):
        while True:
            cand_emit = emission - lr * g_emit
            cand_trans = transition - lr * g_trans
            cand_loss = _corpus_loss(cand_emit, cand_trans, encoded, config.l2_lambda)
            if not np.isfinite(cand_loss):
                raise DivergenceError("non-finite loss", epoch=epoch)
            if cand_loss <= loss + 1e-12:
                break
            lr *= 0.5
            if lr < 1e-12:
                return CrfModel(tag_set, vocab, emission, transition,
                                l2_lambda=config.l2_lambda, matcher=matcher)
        emission, transition = cand_emit, cand_trans
        improvement = loss - cand_loss
        loss, g_emit, g_trans = _corpus_loss_and_grad(
            emission, transition, encoded, config.l2_lambda)
        if improvement < config.tol:
            break

    return CrfModel(tag_set, vocab, emission, transition,
                    l2_lambda=config.l2_lambda, matcher=matcher)


def token_f1(pairs: Iterable[tuple[Sequence[BioTag], Sequence[BioTag]]]) -> float:
    """Micro-averaged F1 over non-outside tokens for (gold, predicted) pairs."""
    correct = predicted = gold_count = 0
    for gold, pred in pairs:
        if len(gold) != len(pred):
            raise ShapeError("gold and predicted tag sequences differ in length")
        for g, p in zip(gold, pred):
            if not p.is_outside:
                predicted += 1
                if p == g:
                    correct += 1
            if not g.is_outside:
                gold_count += 1
    if predicted == 0 or gold_count == 0:
        return 0.0
    precision = correct / predicted
    recall = correct / gold_count
    if precision + recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def save(model: CrfModel, path: str | Path) -> None:
    payload = {
        "format": MODEL_MAGIC,
        "tag_set": [str(t) for t in model.tag_set],
        "feature_vocab": model.feature_vocab,
        "l2_lambda": model.l2_lambda,
        "emission": model.emission.tolist(),
        "transition": model.transition.tolist(),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load(path: str | Path, matcher: PhraseMatcher | None = None) -> CrfModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a JSON model file: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != MODEL_MAGIC:
        raise ModelError(f"{path}: expected a {MODEL_MAGIC} model file")
    try:
        return CrfModel(
            tag_set=tuple(BioTag.parse(s) for s in payload["tag_set"]),
            feature_vocab={str(k): int(v) for k, v in payload["feature_vocab"].items()},
            emission=np.array(payload["emission"], dtype=float),
            transition=np.array(payload["transition"], dtype=float),
            l2_lambda=float(payload["l2_lambda"]),
            matcher=matcher,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model payload: {exc}") from None
