"""Impact scoring: severity by spatio-temporal grouping, likelihood by
distance to the city centre, impact as their product.

Events land in a fixed lat/lon grid; same-class reports in one cell within
a small time window count as repeat references of a single event, and the
group size is the severity. Likelihood decays linearly with geodesic
distance from the centre, normalized by the bounding-box diagonal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Mapping

from .errors import ConfigError, FormatError, LocationUnresolvedError
from .geo import CityFrame, GeoPoint, vincenty
from .text import (
    EventClass, format_timestamp, mask_mentions, parse_timestamp, tokenize,
)


@dataclass(frozen=True)
class EventAnnotation:
    """One classified tweet with its resolved event fields."""

    tweet_id: str
    text: str
    event_types: frozenset[EventClass]
    tweet_time: datetime
    event_location: GeoPoint | None = None
    location_text: str | None = None
    tweet_geo: GeoPoint | None = None
    severity: int | None = None
    likelihood: float | None = None
    impact: float | None = None

    def __post_init__(self):
        if not self.event_types:
            raise FormatError(f"annotation {self.tweet_id}: empty event types")
        if self.severity is not None and self.severity < 1:
            raise FormatError(f"annotation {self.tweet_id}: severity must be >= 1")
        if self.likelihood is not None and not (0.0 <= self.likelihood <= 1.0):
            raise FormatError(f"annotation {self.tweet_id}: likelihood out of [0,1]")
        if self.impact is not None:
            if self.severity is None or self.likelihood is None:
                raise FormatError(
                    f"annotation {self.tweet_id}: impact set without its factors")
            if self.impact != self.severity * self.likelihood:
                raise FormatError(
                    f"annotation {self.tweet_id}: impact is not severity x likelihood")

    @property
    def resolved_location(self) -> GeoPoint | None:
        """Extracted event location when available, else the tweet geotag."""
        return self.event_location if self.event_location is not None else self.tweet_geo


@dataclass
class GridIndex:
    """Annotations bucketed by (grid cell, event class)."""

    cell_size_deg: float = 0.01
    cells: dict[tuple[int, int, EventClass], list[EventAnnotation]] = field(
        default_factory=dict)

    def __post_init__(self):
        if self.cell_size_deg <= 0:
            raise ConfigError("grid cell size must be positive")

    def cell_of(self, p: GeoPoint) -> tuple[int, int]:
        return (math.floor(p.lon / self.cell_size_deg),
                math.floor(p.lat / self.cell_size_deg))

    def add(self, a: EventAnnotation) -> None:
        loc = a.resolved_location
        if loc is None:
            raise LocationUnresolvedError(
                f"annotation {a.tweet_id} has no usable location")
        x, y = self.cell_of(loc)
        for cls in a.event_types:
            self.cells.setdefault((x, y, cls), []).append(a)


def severity(index: GridIndex, a: EventAnnotation, delta_t: timedelta) -> int:
    """Count of thematically coherent reports, including this one.

    Coherent means: same grid cell, at least one shared event class, and
    timestamps within delta_t. Annotations sharing several classes still
    count once.
    """
    loc = a.resolved_location
    if loc is None:
        raise LocationUnresolvedError(
            f"annotation {a.tweet_id} has no usable location")
    x, y = index.cell_of(loc)
    group_ids = {id(a)}
    for cls in a.event_types:
        for other in index.cells.get((x, y, cls), ()):
            if abs((other.tweet_time - a.tweet_time).total_seconds()) \
                    <= delta_t.total_seconds():
                group_ids.add(id(other))
    return len(group_ids)


def likelihood(frame: CityFrame, location: GeoPoint) -> float:
    """One minus the centre distance over the bbox diagonal, clamped to [0,1]."""
    ratio = vincenty(location, frame.centre) / vincenty(frame.bbox_sw, frame.bbox_ne)
    return min(1.0, max(0.0, 1.0 - ratio))


def impact(severity_score: int, likelihood_score: float) -> float:
    """Exact product of the two factor scores."""
    if severity_score < 1:
        raise ValueError(f"severity must be >= 1, got {severity_score}")
    if not (0.0 <= likelihood_score <= 1.0):
        raise ValueError(f"likelihood must lie in [0,1], got {likelihood_score}")
    return severity_score * likelihood_score


def score_annotation(a: EventAnnotation, index: GridIndex, frame: CityFrame,
                     delta_t: timedelta) -> EventAnnotation:
    """Fill severity, likelihood, and impact; unlocated annotations pass
    through with all three omitted."""
    loc = a.resolved_location
    if loc is None:
        return a
    sev = severity(index, a, delta_t)
    lik = likelihood(frame, loc)
    return replace(a, severity=sev, likelihood=lik, impact=impact(sev, lik))


def load_gazetteer(path: str | Path) -> dict[str, GeoPoint]:
    """Read the name → coordinate lookup from a `name,lat,lon` CSV."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"missing gazetteer file {path}")
    out: dict[str, GeoPoint] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or \
                [f.strip() for f in reader.fieldnames] != ["name", "lat", "lon"]:
            raise FormatError(f"{path}: header must be name,lat,lon")
        for lineno, row in enumerate(reader, start=2):
            try:
                out[row["name"].strip().lower()] = GeoPoint(
                    float(row["lat"]), float(row["lon"]))
            except (TypeError, ValueError, ConfigError) as exc:
                raise FormatError(f"{path}:{lineno}: bad row: {exc}") from None
    return out


def resolve_location(gazetteer: Mapping[str, GeoPoint], name: str) -> GeoPoint | None:
    """Look up a location string; falls back to token-normalized form."""
    key = name.strip().lower()
    if key in gazetteer:
        return gazetteer[key]
    try:
        normalized = " ".join(str(t) for t in tokenize(name))
    except Exception:
        return None
    return gazetteer.get(normalized)


def annotation_to_dict(a: EventAnnotation) -> dict:
    d: dict = {
        "tweet_id": a.tweet_id,
        "text": a.text,
        "event_types": sorted(c.value for c in a.event_types),
        "tweet_time": format_timestamp(a.tweet_time),
    }
    if a.event_location is not None:
        d["event_lat"] = a.event_location.lat
        d["event_lon"] = a.event_location.lon
    if a.location_text is not None:
        d["location_text"] = a.location_text
    if a.tweet_geo is not None:
        d["tweet_lat"] = a.tweet_geo.lat
        d["tweet_lon"] = a.tweet_geo.lon
    if a.severity is not None:
        d["severity"] = a.severity
    if a.likelihood is not None:
        d["likelihood"] = a.likelihood
    if a.impact is not None:
        d["impact"] = a.impact
    return d


def annotation_from_dict(d: dict) -> EventAnnotation:
    try:
        event_location = None
        if "event_lat" in d:
            event_location = GeoPoint(float(d["event_lat"]), float(d["event_lon"]))
        tweet_geo = None
        if "tweet_lat" in d:
            tweet_geo = GeoPoint(float(d["tweet_lat"]), float(d["tweet_lon"]))
        return EventAnnotation(
            tweet_id=str(d["tweet_id"]),
            text=d["text"],
            event_types=frozenset(EventClass(n) for n in d["event_types"]),
            tweet_time=parse_timestamp(d["tweet_time"]),
            event_location=event_location,
            location_text=d.get("location_text"),
            tweet_geo=tweet_geo,
            severity=d.get("severity"),
            likelihood=d.get("likelihood"),
            impact=d.get("impact"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad annotation record: {exc}") from None


def annotation_properties(a: EventAnnotation) -> dict:
    """Display properties for serving: @-mentions masked, raw corpus intact."""
    properties = {
        "tweet_id": a.tweet_id,
        "classes": sorted(c.value for c in a.event_types),
        "time": format_timestamp(a.tweet_time),
        "text": mask_mentions(a.text),
    }
    if a.impact is not None:
        properties["impact"] = a.impact
    if a.severity is not None:
        properties["severity"] = a.severity
    if a.likelihood is not None:
        properties["likelihood"] = a.likelihood
    return properties


def annotation_feature(a: EventAnnotation) -> dict | None:
    """GeoJSON Point feature for a located annotation, None otherwise."""
    loc = a.resolved_location
    if loc is None:
        return None
    return {
        "type": "Feature",
        "geometry": {"type": "Point", "coordinates": [loc.lon, loc.lat]},
        "properties": annotation_properties(a),
    }
