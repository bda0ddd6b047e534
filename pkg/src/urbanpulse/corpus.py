"""Deterministic synthetic corpora for training, evaluation, and fixtures.

Everything here is seeded: the same seed always produces byte-identical
corpora, which keeps model training and the end-to-end fixtures
reproducible.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import Sequence

import numpy as np

from .errors import ShapeError
from .geo import GeoPoint, LONDON, CityFrame
from .text import (
    AnnotatedTweet, BioTag, ClassDictionary, EventClass, NerSpan,
    TaggedSentence, Tweet, tags_from_spans,
)

EPOCH = datetime(2016, 2, 3, 12, 0, 0, tzinfo=timezone.utc)

_FILLER = (
    "just saw so much going near here honestly what day really good vibes "
    "out there tonight love this city morning everyone feeling it again now"
).split()

_CLASS_COMMENTS = {
    EventClass.CRIME: ["police everywhere", "stay safe people"],
    EventClass.CULTURAL: ["tickets sold fast", "what performance"],
    EventClass.FOOD: ["tasted amazing", "queue was worth it"],
    EventClass.SOCIAL: ["everyone came", "great turnout"],
    EventClass.SPORT: ["what finish", "crowd went wild"],
    EventClass.WEATHER: ["soaked through", "umbrella broke"],
    EventClass.TRANSPORTATION: ["late again", "avoid if you can"],
}


def _pick(rng: np.random.Generator, seq: Sequence):
    return seq[int(rng.integers(0, len(seq)))]


def _filler(rng: np.random.Generator, low: int, high: int) -> list[str]:
    n = int(rng.integers(low, high + 1))
    return [_pick(rng, _FILLER) for _ in range(n)]


def generate_crf_corpus(dictionaries: dict[EventClass, ClassDictionary],
                        n: int, seed: int = 0,
                        frame: CityFrame = LONDON) -> list[AnnotatedTweet]:
    """Tweets whose texts embed dictionary phrases with gold span tags.

    Each tweet carries one or two event phrases (often followed by a
    location phrase) surrounded by filler words; tags mark the embedded
    phrases and labels collect the non-Location span classes.
    """
    if n <= 0:
        raise ShapeError("corpus size must be positive")
    rng = np.random.default_rng(seed)
    event_classes = [c for c in dictionaries if c is not EventClass.LOCATION]
    location = dictionaries.get(EventClass.LOCATION)
    out = []
    for idx in range(n):
        tokens: list[str] = []
        spans: list[NerSpan] = []
        for _ in range(int(rng.integers(1, 3))):
            tokens.extend(_filler(rng, 1, 3))
            cls = _pick(rng, event_classes)
            phrase = _pick(rng, dictionaries[cls].phrases)
            spans.append(NerSpan(cls, len(tokens), len(tokens) + len(phrase)))
            tokens.extend(phrase)
            if location is not None and rng.random() < 0.5:
                tokens.append("at")
                place = _pick(rng, location.phrases)
                spans.append(NerSpan(EventClass.LOCATION,
                                     len(tokens), len(tokens) + len(place)))
                tokens.extend(place)
        tokens.extend(_filler(rng, 0, 2))
        labels = frozenset(s.event_class for s in spans
                           if s.event_class is not EventClass.LOCATION)
        if not labels:
            labels = frozenset({EventClass.OTHER})
        geo = _random_point(rng, frame)
        tweet = Tweet(
            id=f"synth-{idx:06d}",
            text=" ".join(tokens),
            created_at=EPOCH + timedelta(seconds=30 * idx),
            geo=geo,
        )
        out.append(AnnotatedTweet(
            tweet=tweet, labels=labels,
            tags=tuple(tags_from_spans(spans, len(tokens)))))
    return out


def _random_point(rng: np.random.Generator, frame: CityFrame) -> GeoPoint:
    return GeoPoint(
        float(rng.uniform(frame.bbox_sw.lat, frame.bbox_ne.lat)),
        float(rng.uniform(frame.bbox_sw.lon, frame.bbox_ne.lon)),
    )


# Unambiguous word lists per part-of-speech tag for the grammar corpus.
_GRAMMAR_WORDS = {
    "DET": ["the", "a", "this", "every"],
    "ADJ": ["big", "red", "quiet", "busy", "cold", "late"],
    "NOUN": ["dog", "street", "train", "market", "storm", "crowd", "driver",
             "game", "bridge", "coffee"],
    "VERB": ["runs", "stops", "sees", "blocks", "crosses", "floods", "wins"],
    "ADP": ["in", "on", "near", "under", "through"],
    "ADV": ["quickly", "slowly", "often", "badly"],
    "PRON": ["it", "she", "he", "they", "we"],
    "AUX": ["is", "was", "were"],
    "CCONJ": ["and", "but"],
    "NUM": ["two", "three", "seven", "forty"],
    "PART": ["to", "not"],
    "PUNCT": [".", ",", "!"],
    "INTJ": ["wow", "oh", "ouch"],
    "SCONJ": ["because", "while", "although"],
    "SYM": ["%", "+", "="],
    "X": ["etc", "blah"],
}

_LOC_NAMES = [("camden", "lock"), ("mill", "road"), ("abbey", "wood"),
              ("perry", "vale"), ("holland",), ("lee", "green")]
_ORG_NAMES = [("city", "council"), ("transit", "authority"),
              ("river", "trust"), ("metro",), ("northline",)]

# Sentence skeletons; PROPN slots are filled from the entity name lists.
_GRAMMAR_TEMPLATES = [
    ["DET", "ADJ", "NOUN", "VERB", "ADV", "PUNCT"],
    ["PRON", "AUX", "ADJ", "PUNCT"],
    ["DET", "NOUN", "VERB", "ADP", "DET", "NOUN", "PUNCT"],
    ["INTJ", "PUNCT", "DET", "NOUN", "AUX", "ADJ", "PUNCT"],
    ["LOC", "VERB", "ADV", "PUNCT"],
    ["DET", "NOUN", "ADP", "LOC", "AUX", "ADJ", "PUNCT"],
    ["ORG", "VERB", "DET", "NOUN", "PUNCT"],
    ["PRON", "VERB", "NUM", "NOUN", "CCONJ", "NUM", "NOUN", "PUNCT"],
    ["NOUN", "SYM", "NUM", "PUNCT"],
    ["SCONJ", "PRON", "AUX", "ADJ", "PUNCT", "PRON", "VERB", "ADV", "PUNCT"],
    ["PART", "VERB", "ADP", "LOC", "AUX", "X", "PUNCT"],
]


def generate_tag_corpus(n: int, seed: int = 0) -> list[TaggedSentence]:
    """Grammar-template sentences with part-of-speech and LOC/ORG labels."""
    if n <= 0:
        raise ShapeError("corpus size must be positive")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        template = _pick(rng, _GRAMMAR_TEMPLATES)
        tokens: list[str] = []
        pos: list[str] = []
        ner: list[str] = []
        for slot in template:
            if slot in ("LOC", "ORG"):
                names = _LOC_NAMES if slot == "LOC" else _ORG_NAMES
                name = _pick(rng, names)
                for j, word in enumerate(name):
                    tokens.append(word)
                    pos.append("PROPN")
                    ner.append(("B-" if j == 0 else "I-") + slot)
            else:
                tokens.append(_pick(rng, _GRAMMAR_WORDS[slot]))
                pos.append(slot)
                ner.append("O")
        out.append(TaggedSentence(tuple(tokens), tuple(pos), tuple(ner)))
    return out


def generate_tweet_stream(dictionaries: dict[EventClass, ClassDictionary],
                          n: int, seed: int = 0,
                          frame: CityFrame = LONDON,
                          start: datetime = EPOCH,
                          spacing_seconds: float = 20.0) -> list[Tweet]:
    """An ordered replay stream of unlabelled tweets.

    Most tweets embed an event phrase (and often a place); roughly one in
    five is idle chatter. Coordinates are present for about 70 percent and
    a few tweets mention a handle, exercising the display masking.
    """
    if n <= 0:
        raise ShapeError("stream size must be positive")
    rng = np.random.default_rng(seed)
    event_classes = [c for c in dictionaries if c is not EventClass.LOCATION]
    location = dictionaries.get(EventClass.LOCATION)
    out = []
    for idx in range(n):
        words: list[str] = []
        if rng.random() < 0.1:
            words.append("@friend" + str(int(rng.integers(1, 50))))
        if rng.random() < 0.8:
            words.extend(_filler(rng, 1, 3))
            cls = _pick(rng, event_classes)
            words.extend(_pick(rng, dictionaries[cls].phrases))
            if location is not None and rng.random() < 0.6:
                words.append("at")
                words.extend(_pick(rng, location.phrases))
            comment = _CLASS_COMMENTS.get(cls)
            if comment is not None and rng.random() < 0.5:
                words.extend(_pick(rng, comment).split())
        else:
            words.extend(_filler(rng, 3, 7))
        geo = _random_point(rng, frame) if rng.random() < 0.7 else None
        out.append(Tweet(
            id=f"stream-{idx:06d}",
            text=" ".join(words),
            created_at=start + timedelta(seconds=spacing_seconds * idx),
            geo=geo,
        ))
    return out


def generate_lead_time_stream(seed: int = 0, frame: CityFrame = LONDON,
                              start: datetime = EPOCH
                              ) -> tuple[list[tuple[GeoPoint, datetime]],
                                         list["AuthorityRecord"]]:
    """Paired tweet events and authority records with known lead statistics.

    1000 tweet events sit each at the exact location of its own authority
    record, so nearest-record matching is unambiguous. 495 tweets precede
    their record; the positive leads average 297.5 minutes exactly.
    """
    from .similarity import AuthorityRecord, RecordKind

    rng = np.random.default_rng(seed)
    n = 1000
    lats = np.linspace(frame.bbox_sw.lat + 0.01, frame.bbox_ne.lat - 0.01, n)
    lons = frame.bbox_sw.lon + 0.02 + (frame.bbox_ne.lon - frame.bbox_sw.lon - 0.04) \
        * rng.permutation(n) / n

    # 247 leads of 247.5 min, 247 of 347.5, one of exactly 297.5: the
    # positive leads average 297.5 exactly and 495 of 1000 tweets are early.
    leads = [247.5] * 247 + [347.5] * 247 + [297.5] + [-30.5] * 505
    assert len(leads) == n

    events: list[tuple[GeoPoint, datetime]] = []
    records: list[AuthorityRecord] = []
    for i in range(n):
        point = GeoPoint(float(lats[i]), float(lons[i]))
        record_time = start + timedelta(minutes=float(i))
        records.append(AuthorityRecord(
            kind=RecordKind.TRAFFIC,
            location=point,
            timestamp=record_time,
            category="roadworks",
            source_id=f"rec-{i:05d}",
        ))
        events.append((point, record_time - timedelta(minutes=leads[i])))
    return events, records


def generate_fusion_dataset(n_per_class: int, seed: int = 0,
                            theta_dim: int = 19, phi_dim: int = 18,
                            noise: float = 0.05,
                            multi_label_every: int = 0
                            ) -> list[tuple[np.ndarray, np.ndarray, frozenset[EventClass]]]:
    """Two-view class blobs that are linearly separable per class.

    Each class owns a random centroid in both views; items scatter around
    it with small isotropic noise. When multi_label_every is positive,
    every k-th item is blended with the next class's centroid and carries
    both labels.
    """
    from .text import CATEGORY_CLASSES

    if n_per_class <= 0:
        raise ShapeError("need at least one item per class")
    rng = np.random.default_rng(seed)
    classes = list(CATEGORY_CLASSES)
    centroids = {
        c: (rng.normal(0, 1, theta_dim), rng.normal(0, 1, phi_dim))
        for c in classes
    }
    out = []
    counter = 0
    for c_idx, c in enumerate(classes):
        ct, cp = centroids[c]
        for _ in range(n_per_class):
            counter += 1
            labels = frozenset({c})
            theta = ct + noise * rng.normal(0, 1, theta_dim)
            phi = cp + noise * rng.normal(0, 1, phi_dim)
            if multi_label_every and counter % multi_label_every == 0:
                other = classes[(c_idx + 1) % len(classes)]
                ot, op = centroids[other]
                theta = 0.5 * (theta + ot)
                phi = 0.5 * (phi + op)
                labels = frozenset({c, other})
            out.append((theta, phi, labels))
    return out
