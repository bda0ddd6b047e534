"""Orchestration: models + lexicons in, scored event annotations out.

A Pipeline bundles the three trained models with the gazetteer and city
frame, turns tweets into impact-scored annotations, and a SnapshotStore
gives the service layer atomic, windowed views over the growing stream.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import cnn as cnn_mod
from . import crf as crf_mod
from . import fusion as fusion_mod
from .config import PipelineConfig
from .errors import ModelError, ShapeError
from .geo import GeoPoint
from .impact import (
    EventAnnotation, GridIndex, annotation_feature, annotation_properties,
    load_gazetteer, resolve_location, score_annotation,
)
from .text import EventClass, Tweet, spans_from_tags, tokenize

# The UI never asks for more than the last hour.
MAX_WINDOW_SECONDS = 3600.0


@dataclass(frozen=True)
class WindowSnapshot:
    """One immutable serving window: annotations plus their class counts."""

    window_start: datetime
    window_end: datetime
    annotations: tuple[EventAnnotation, ...]
    class_histogram: Mapping[EventClass, int]

    def __post_init__(self):
        length = (self.window_end - self.window_start).total_seconds()
        if length < 0 or length > MAX_WINDOW_SECONDS:
            raise ShapeError(
                f"window length {length:.0f}s outside [0, {MAX_WINDOW_SECONDS:.0f}]")
        want = class_histogram(self.annotations)
        if dict(self.class_histogram) != want:
            raise ShapeError("histogram inconsistent with annotations")


def class_histogram(annotations: Iterable[EventAnnotation]
                    ) -> dict[EventClass, int]:
    """Count each label once per annotation; multi-label tweets count in
    every class they carry."""
    counts: dict[EventClass, int] = {}
    for a in annotations:
        for cls in a.event_types:
            counts[cls] = counts.get(cls, 0) + 1
    return counts


def snapshot_from_annotations(annotations: Sequence[EventAnnotation],
                              start: datetime, end: datetime) -> WindowSnapshot:
    inside = tuple(a for a in annotations if start <= a.tweet_time <= end)
    return WindowSnapshot(window_start=start, window_end=end,
                          annotations=inside,
                          class_histogram=class_histogram(inside))


def annotations_geojson(annotations: Iterable[EventAnnotation]) -> dict:
    """FeatureCollection of located annotations; unlocated ones ride in a
    sidecar array so nothing silently disappears."""
    features = []
    unlocated = []
    for a in annotations:
        feature = annotation_feature(a)
        if feature is None:
            unlocated.append(annotation_properties(a))
        else:
            features.append(feature)
    return {"type": "FeatureCollection", "features": features,
            "unlocated": unlocated}


def emit_geojson(snapshot: WindowSnapshot | None) -> dict:
    return annotations_geojson(snapshot.annotations if snapshot else ())


@dataclass
class Pipeline:
    config: PipelineConfig
    crf_model: crf_mod.CrfModel
    cnn_model: cnn_mod.CnnModel
    fusion_model: fusion_mod.FusionModel
    gazetteer: Mapping[str, GeoPoint]

    @classmethod
    def load(cls, config: PipelineConfig) -> "Pipeline":
        def check(path, name):
            if not Path(path).is_file():
                raise ModelError(f"{name} model not found at {path}; train it first")
            return path

        from .text import PhraseMatcher, load_dictionaries

        matcher = PhraseMatcher(load_dictionaries(config.dictionaries_dir))
        return cls(
            config=config,
            crf_model=crf_mod.load(check(config.crf_model_path, "sequence tagger"),
                                   matcher=matcher),
            cnn_model=cnn_mod.load(check(config.cnn_model_path, "window tagger")),
            fusion_model=fusion_mod.load(check(config.fusion_model_path, "fusion")),
            gazetteer=load_gazetteer(config.gazetteer_path),
        )

    def annotate(self, tweet: Tweet) -> EventAnnotation:
        """Classify one tweet and resolve its event location, unscored."""
        labels, _, boosted = fusion_mod.classify_tagged(
            self.crf_model, self.cnn_model, self.fusion_model, tweet)
        tokens = tokenize(tweet.text)

        location_text = None
        event_location = None
        for span in spans_from_tags(boosted):
            if span.event_class is not EventClass.LOCATION:
                continue
            phrase = " ".join(t.surface for t in tokens[span.start:span.end])
            if location_text is None:
                location_text = phrase
            resolved = resolve_location(self.gazetteer, phrase)
            if resolved is not None:
                location_text = phrase
                event_location = resolved
                break

        return EventAnnotation(
            tweet_id=tweet.id,
            text=tweet.text,
            event_types=labels,
            tweet_time=tweet.created_at,
            event_location=event_location,
            location_text=location_text,
            tweet_geo=tweet.geo,
        )

    def score(self, annotations: Sequence[EventAnnotation]
              ) -> list[EventAnnotation]:
        """Impact-score a batch against its own co-report density."""
        index = GridIndex(cell_size_deg=self.config.grid_cell_deg)
        for a in annotations:
            if a.resolved_location is not None:
                index.add(a)
        delta_t = timedelta(seconds=self.config.delta_t_seconds)
        return [score_annotation(a, index, self.config.frame, delta_t)
                for a in annotations]

    def process(self, tweets: Iterable[Tweet]) -> list[EventAnnotation]:
        return self.score([self.annotate(t) for t in tweets])


class SnapshotStore:
    """Append-only annotation history with an atomically swapped window.

    Readers always see either the previous snapshot or the new one,
    never a half-built window; `swap` rebuilds impact scores so every
    served annotation reflects the co-reports known at swap time.
    """

    def __init__(self, config: PipelineConfig):
        self._config = config
        self._lock = threading.Lock()
        self._raw: list[EventAnnotation] = []
        self._scored: tuple[EventAnnotation, ...] = ()
        self._snapshot: WindowSnapshot | None = None

    def extend(self, annotations: Iterable[EventAnnotation]) -> None:
        with self._lock:
            self._raw.extend(annotations)

    def swap(self, now: datetime | None = None) -> WindowSnapshot:
        """Re-score history and publish a fresh trailing-hour snapshot."""
        with self._lock:
            raw = list(self._raw)
        if now is None:
            now = (max(a.tweet_time for a in raw) if raw
                   else datetime.now(timezone.utc))

        index = GridIndex(cell_size_deg=self._config.grid_cell_deg)
        for a in raw:
            if a.resolved_location is not None:
                index.add(a)
        delta_t = timedelta(seconds=self._config.delta_t_seconds)
        scored = tuple(score_annotation(a, index, self._config.frame, delta_t)
                       for a in raw)

        start = now - timedelta(seconds=MAX_WINDOW_SECONDS)
        snapshot = snapshot_from_annotations(scored, start, now)
        self._scored = scored
        self._snapshot = snapshot
        return snapshot

    def current(self) -> WindowSnapshot | None:
        return self._snapshot

    def window(self, minutes: float) -> WindowSnapshot:
        """Trailing sub-window of the current snapshot, empty if none."""
        snapshot = self._snapshot
        if snapshot is None:
            now = datetime.now(timezone.utc)
            return snapshot_from_annotations((), now, now)
        start = snapshot.window_end - timedelta(minutes=minutes)
        return snapshot_from_annotations(snapshot.annotations,
                                         max(start, snapshot.window_start),
                                         snapshot.window_end)

    def histogram(self, day) -> dict[EventClass, int]:
        """Class counts over every stored annotation on a UTC date."""
        scored = self._scored
        return class_histogram(a for a in scored
                               if a.tweet_time.astimezone(timezone.utc).date() == day)

    def timeline(self, limit: int) -> list[EventAnnotation]:
        """The most recent annotations, newest first."""
        scored = self._scored
        ordered = sorted(scored, key=lambda a: a.tweet_time)
        return list(reversed(ordered[-limit:])) if limit > 0 else []
