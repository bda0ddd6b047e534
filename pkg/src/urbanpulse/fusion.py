"""Multi-view event classifier over the two tagger views.

The visible vector stacks the syntactic view and the semantic view; class
scores are linear in that vector (energy parameters W, b, k) and pass
through a softmax. The visible bias b contributes the same amount to every
class score, so the likelihood cannot move it; it is kept because the
energy formulation's parameter set includes it. The quadratic
hidden-activity form of the underlying energy model is exposed as its own
tested operation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cnn as cnn_mod
from . import crf as crf_mod
from .errors import DivergenceError, FormatError, ModelError, ShapeError
from .text import CATEGORY_CLASSES, EventClass, Tweet, spans_from_tags, tokenize

MODEL_MAGIC = "URBANPULSE-MV-v1"


def _as_vector(view) -> np.ndarray:
    vec = getattr(view, "vector", view)
    return np.asarray(vec, dtype=float)


@dataclass
class FusionModel:
    theta_dim: int
    phi_dim: int
    weights: np.ndarray        # (theta_dim + phi_dim, |classes|)
    visible_bias: np.ndarray   # (theta_dim + phi_dim,)
    class_bias: np.ndarray     # (|classes|,)
    tau: float = 0.3
    classes: tuple[EventClass, ...] = CATEGORY_CLASSES

    def __post_init__(self):
        d = self.theta_dim + self.phi_dim
        if len(self.classes) != len(CATEGORY_CLASSES):
            raise ShapeError(f"expected {len(CATEGORY_CLASSES)} classes")
        if self.weights.shape != (d, len(self.classes)):
            raise ShapeError(
                f"weights shape {self.weights.shape} must be ({d}, {len(self.classes)})")
        if self.visible_bias.shape != (d,):
            raise ShapeError("visible bias length must match the views")
        if self.class_bias.shape != (len(self.classes),):
            raise ShapeError("class bias length must match the class count")
        if not (0.0 < self.tau < 1.0):
            raise ShapeError(f"tau must lie in (0, 1), got {self.tau}")
        for arr in (self.weights, self.visible_bias, self.class_bias):
            if not np.all(np.isfinite(arr)):
                raise ModelError("fusion parameters must be finite")


def concat_views(model: FusionModel, theta, phi) -> np.ndarray:
    """Stack the syntactic view over the semantic view, no rescaling."""
    t = _as_vector(theta)
    p = _as_vector(phi)
    if t.shape != (model.theta_dim,):
        raise ShapeError(f"syntactic view has length {t.shape}, "
                         f"model expects {model.theta_dim}")
    if p.shape != (model.phi_dim,):
        raise ShapeError(f"semantic view has length {p.shape}, "
                         f"model expects {model.phi_dim}")
    return np.concatenate([t, p])


def quadratic_activity(weights: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Hidden activities of the energy model: h_i = sum_j W[j,i] (u_j + w_j)^2."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.shape != w.shape:
        raise ShapeError(f"projection shapes differ: {u.shape} vs {w.shape}")
    if weights.shape[0] != u.shape[0]:
        raise ShapeError(
            f"weights expect {weights.shape[0]} visible units, got {u.shape[0]}")
    return ((u + w) ** 2) @ weights


def hidden_activity(model: FusionModel, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return quadratic_activity(model.weights, u, w)


def log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    return shifted - np.log(np.exp(shifted).sum())


@dataclass(frozen=True)
class ClassScores:
    scores: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        if self.scores.shape != self.probs.shape:
            raise ShapeError("scores and probs must have identical shape")
        if np.any(self.probs < 0) or abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ShapeError("probs must be a distribution")

    @property
    def log_probs(self) -> np.ndarray:
        return log_softmax(self.scores)


def class_scores(model: FusionModel, v: np.ndarray) -> ClassScores:
    """Linear class scores plus the class-independent visible-bias term."""
    v = np.asarray(v, dtype=float)
    d = model.theta_dim + model.phi_dim
    if v.shape != (d,):
        raise ShapeError(f"visible vector has shape {v.shape}, expected ({d},)")
    s = v @ model.weights + model.class_bias + float(model.visible_bias @ v)
    return ClassScores(scores=s, probs=np.exp(log_softmax(s)))


@dataclass
class FusionTrainConfig:
    learning_rate: float = 0.5
    epochs: int = 200
    seed: int = 0
    tau: float = 0.3
    tol: float = 1e-10
    # cap on {Other}-labelled items kept per largest-class item when
    # assembling calibration data upstream; training itself never sees Other
    other_subsample_ratio: float = 1.0


def _encode_dataset(dataset, classes: tuple[EventClass, ...]):
    index = {c: i for i, c in enumerate(classes)}
    xs, hots, counts = [], [], []
    for theta, phi, labels in dataset:
        t = _as_vector(theta)
        p = _as_vector(phi)
        if not labels:
            raise FormatError("training item has no labels")
        hot = np.zeros(len(classes))
        for c in labels:
            if c not in index:
                raise FormatError(f"label {c} is not a trainable class")
            hot[index[c]] = 1.0
        xs.append(np.concatenate([t, p]))
        hots.append(hot)
        counts.append(float(len(labels)))
    x = np.stack(xs)
    return x, np.stack(hots), np.array(counts)


def nll_and_gradients(weights, class_bias, x, hots, counts
                      ) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean NLL over (item, label) terms and gradients for W and k."""
    s = x @ weights + class_bias
    shifted = s - s.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    logp = shifted - logz[:, None]
    total_terms = counts.sum()
    loss = -(hots * logp).sum() / total_terms
    p = np.exp(logp)
    ds = (counts[:, None] * p - hots) / total_terms
    return float(loss), x.T @ ds, ds.sum(axis=0)


def train(dataset: Sequence[tuple], config: FusionTrainConfig | None = None,
          theta_dim: int | None = None, phi_dim: int | None = None) -> FusionModel:
    """Fit the fusion head by full-batch descent on the mean NLL.

    Multi-label items contribute one term per label. The step size is
    halved whenever a step would increase the loss, so accepted losses are
    non-increasing; the objective is convex, so this converges.
    """
    if config is None:
        config = FusionTrainConfig()
    if not dataset:
        raise ShapeError("training dataset is empty")
    t0 = _as_vector(dataset[0][0])
    p0 = _as_vector(dataset[0][1])
    theta_dim = theta_dim if theta_dim is not None else t0.shape[0]
    phi_dim = phi_dim if phi_dim is not None else p0.shape[0]
    x, hots, counts = _encode_dataset(dataset, CATEGORY_CLASSES)
    if x.shape[1] != theta_dim + phi_dim:
        raise ShapeError("dataset views do not match the declared dims")

    weights = np.zeros((theta_dim + phi_dim, len(CATEGORY_CLASSES)))
    class_bias = np.zeros(len(CATEGORY_CLASSES))
    loss, g_w, g_k = nll_and_gradients(weights, class_bias, x, hots, counts)
    if not np.isfinite(loss):
        raise DivergenceError("non-finite initial loss", epoch=0)

    lr = config.learning_rate
    for epoch in range(1, config.epochs + 1):
        while True:
            cand_w = weights - lr * g_w
            cand_k = class_bias - lr * g_k
            cand_loss, cand_gw, cand_gk = nll_and_gradients(
                cand_w, cand_k, x, hots, counts)
            if not np.isfinite(cand_loss):
                raise DivergenceError("non-finite loss", epoch=epoch)
            if cand_loss <= loss + 1e-12:
                break
            lr *= 0.5
            if lr < 1e-12:
                return FusionModel(theta_dim, phi_dim, weights,
                                   np.zeros(theta_dim + phi_dim), class_bias,
                                   tau=config.tau)
        improvement = loss - cand_loss
        weights, class_bias = cand_w, cand_k
        loss, g_w, g_k = cand_loss, cand_gw, cand_gk
        if improvement < config.tol:
            break

    return FusionModel(theta_dim, phi_dim, weights,
                       np.zeros(theta_dim + phi_dim), class_bias, tau=config.tau)


def training_accuracy(model: FusionModel, dataset: Sequence[tuple]) -> float:
    """Fraction of items whose argmax class is among their labels."""
    if not dataset:
        raise ShapeError("empty dataset")
    correct = 0
    for theta, phi, labels in dataset:
        v = concat_views(model, theta, phi)
        cs = class_scores(model, v)
        if model.classes[int(np.argmax(cs.probs))] in labels:
            correct += 1
    return correct / len(dataset)


def classify_tagged(crf_model: "crf_mod.CrfModel", cnn_model: "cnn_mod.CnnModel",
                    fusion_model: FusionModel, tweet: Tweet | Sequence[str]
                    ) -> tuple[frozenset[EventClass], ClassScores, list]:
    """Label one tweet, also returning its boosted tag sequence.

    Runs the boosted CRF decode and both view poolings, scores the fused
    vector, and applies the coarse gate: with no non-Location span and no
    confident class, the tweet is Other; otherwise the argmax class plus
    every class at or above tau.
    """
    if crf_model is None or cnn_model is None or fusion_model is None:
        raise ModelError("classify needs all three trained models")
    if not np.any(fusion_model.weights):
        raise ModelError("fusion model appears untrained (all-zero weights)")
    tokens = tokenize(tweet.text) if isinstance(tweet, Tweet) else list(tweet)

    tags = crf_mod.decode(crf_model, tokens)
    boosted = cnn_mod.boost_location(tags, cnn_mod.loc_spans(cnn_model, tokens))
    phi = crf_mod.semantic_view_from_tags(boosted)
    theta = cnn_mod.syntactic_view(cnn_model, tokens)
    scores = class_scores(fusion_model, concat_views(fusion_model, theta, phi))

    non_location_spans = [s for s in spans_from_tags(boosted)
                          if s.event_class is not EventClass.LOCATION]
    max_prob = float(scores.probs.max())
    if not non_location_spans and max_prob < fusion_model.tau:
        return frozenset({EventClass.OTHER}), scores, boosted

    labels = {fusion_model.classes[int(np.argmax(scores.probs))]}
    for c, p in zip(fusion_model.classes, scores.probs):
        if p >= fusion_model.tau:
            labels.add(c)
    return frozenset(labels), scores, boosted


def classify(crf_model: "crf_mod.CrfModel", cnn_model: "cnn_mod.CnnModel",
             fusion_model: FusionModel, tweet: Tweet | Sequence[str]
             ) -> tuple[frozenset[EventClass], ClassScores]:
    """Label one tweet: the gate decision plus the class distribution."""
    labels, scores, _ = classify_tagged(crf_model, cnn_model, fusion_model,
                                        tweet)
    return labels, scores


def save(model: FusionModel, path: str | Path) -> None:
    payload = {
        "format": MODEL_MAGIC,
        "theta_dim": model.theta_dim,
        "phi_dim": model.phi_dim,
        "classes": [c.value for c in model.classes],
        "weights": model.weights.tolist(),
        "visible_bias": model.visible_bias.tolist(),
        "class_bias": model.class_bias.tolist(),
        "tau": model.tau,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load(path: str | Path) -> FusionModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a JSON model file: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != MODEL_MAGIC:
        raise ModelError(f"{path}: expected a {MODEL_MAGIC} model file")
    try:
        return FusionModel(
            theta_dim=int(payload["theta_dim"]),
            phi_dim=int(payload["phi_dim"]),
            weights=np.array(payload["weights"], dtype=float),
            visible_bias=np.array(payload["visible_bias"], dtype=float),
            class_bias=np.array(payload["class_bias"], dtype=float),
            tau=float(payload["tau"]),
            classes=tuple(EventClass(name) for name in payload["classes"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed model payload: {exc}") from None
