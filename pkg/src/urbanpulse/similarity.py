"""Correlation of tweet events against authority records.

Authority records become a spatial graph in Earth-centred Cartesian
coordinates, each node weighted by its distance to the city centre. A
class of tweet events is scored by the mean and variance of each event's
minimum centre-weighted distance to the graph; means rescale to [0,1]
similarities against the worst class. Lead times compare tweet timestamps
with their nearest record's.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import EmptyGraphError, FormatError, ShapeError
from .geo import CartesianPoint, GeoPoint, to_cartesian
from .text import EventClass, format_timestamp, parse_timestamp

# Records exactly at the centre would make the weighting divide by zero.
LAMBDA_FLOOR_M = 1.0


class RecordKind(str, Enum):
    TRAFFIC = "Traffic"
    SOCIOCULTURAL = "Sociocultural"


@dataclass(frozen=True)
class AuthorityRecord:
    kind: RecordKind
    location: GeoPoint
    timestamp: datetime
    category: str
    source_id: str

    def __post_init__(self):
        if self.timestamp.tzinfo is None:
            raise FormatError(
                f"record {self.source_id}: timestamp must be timezone-aware")


@dataclass(frozen=True)
class GraphNode:
    point: CartesianPoint
    timestamp: datetime
    category: str
    lam: float


@dataclass(frozen=True)
class EventGraph:
    nodes: tuple[GraphNode, ...]
    centre: CartesianPoint


def build_graph(records: Sequence[AuthorityRecord], centre: GeoPoint) -> EventGraph:
    """Convert records to weighted Cartesian nodes around the city centre."""
    if not records:
        raise EmptyGraphError("cannot build a graph from zero records")
    centre_cart = to_cartesian(centre)
    nodes = []
    for rec in records:
        point = to_cartesian(rec.location)
        lam = max(point.distance_to(centre_cart), LAMBDA_FLOOR_M)
        nodes.append(GraphNode(point=point, timestamp=rec.timestamp,
                               category=rec.category, lam=lam))
    return EventGraph(nodes=tuple(nodes), centre=centre_cart)


def _as_point(event) -> GeoPoint | None:
    if isinstance(event, GeoPoint):
        return event
    return getattr(event, "resolved_location", None)


def weighted_min_cart(cart: CartesianPoint,
                      graph: EventGraph) -> tuple[float, GraphNode]:
    """Minimum centre-weighted distance from a Cartesian point to the graph."""
    if not graph.nodes:
        raise EmptyGraphError("graph has no nodes")
    best = None
    best_node = None
    for node in graph.nodes:
        ratio = cart.distance_to(node.point) / node.lam
        if best is None or ratio < best:
            best = ratio
            best_node = node
    return best, best_node


def weighted_min(point: GeoPoint, graph: EventGraph) -> tuple[float, GraphNode]:
    """Minimum centre-weighted distance from a point to the graph."""
    return weighted_min_cart(to_cartesian(point), graph)


def dissimilarity(events: Sequence, graph: EventGraph) -> tuple[float, float]:
    """Mean and population variance of per-event weighted minima.

    Events may be GeoPoints or annotations carrying a resolved location;
    unlocated items are ignored, and at least one located event is required.
    """
    points = [p for p in (_as_point(e) for e in events) if p is not None]
    if not points:
        raise ShapeError("no located events to score")
    minima = [weighted_min(p, graph)[0] for p in points]
    mu = sum(minima) / len(minima)
    sigma = sum((m - mu) ** 2 for m in minima) / len(minima)
    return mu, sigma


def similarities(per_class_mu: Mapping[EventClass, float]) -> dict[EventClass, float]:
    """Rescale class means by the worst class and flip: 1 - mu/max, clamped."""
    if not per_class_mu:
        raise ShapeError("need at least one class mean")
    max_mu = max(per_class_mu.values())
    out = {}
    for cls, mu in per_class_mu.items():
        if max_mu == 0.0:
            out[cls] = 0.0
        else:
            out[cls] = min(1.0, max(0.0, 1.0 - mu / max_mu))
    return out


@dataclass(frozen=True)
class LeadTimeStats:
    n_events: int
    n_early: int
    fraction_early: float
    mean_lead_minutes: float | None


def _as_timed_point(event) -> tuple[GeoPoint, datetime] | None:
    if isinstance(event, tuple):
        return event
    point = getattr(event, "resolved_location", None)
    if point is None:
        return None
    return point, event.tweet_time


def lead_times(events: Sequence, graph: EventGraph) -> LeadTimeStats:
    """How often and by how much tweet events precede their nearest record.

    Events are (point, timestamp) pairs or annotations carrying a resolved
    location; unlocated annotations are ignored. Each event is matched to
    its nearest node under the centre-weighted metric; the lead is the
    record time minus the tweet time. Early means a strictly positive
    lead, and the mean is over early events only.
    """
    timed = [t for t in (_as_timed_point(e) for e in events) if t is not None]
    if not timed:
        raise ShapeError("no located events to analyse")
    n_early = 0
    lead_sum_minutes = 0.0
    for point, when in timed:
        _, node = weighted_min(point, graph)
        lead_minutes = (node.timestamp - when).total_seconds() / 60.0
        if lead_minutes > 0:
            n_early += 1
            lead_sum_minutes += lead_minutes
    mean_lead = lead_sum_minutes / n_early if n_early else None
    return LeadTimeStats(
        n_events=len(timed),
        n_early=n_early,
        fraction_early=n_early / len(timed),
        mean_lead_minutes=mean_lead,
    )


@dataclass(frozen=True)
class ClassRow:
    mu: float
    sigma: float
    similarity: float
    n_events: int


@dataclass(frozen=True)
class SimilarityReport:
    rows: dict[EventClass, ClassRow]
    lead_time_stats: LeadTimeStats | None = None


def build_report(annotations: Iterable, graph: EventGraph,
                 lead_events: Sequence[tuple[GeoPoint, datetime]] | None = None
                 ) -> SimilarityReport:
    """Per-class dissimilarity rows plus optional lead-time statistics.

    Classes with no located events are absent from the report rather than
    scored as zero.
    """
    by_class: dict[EventClass, list[GeoPoint]] = {}
    for a in annotations:
        point = _as_point(a)
        if point is None:
            continue
        for cls in getattr(a, "event_types", ()):  # annotations only
            if cls is not EventClass.OTHER:
                by_class.setdefault(cls, []).append(point)
    stats: dict[EventClass, tuple[float, float, int]] = {}
    for cls, points in by_class.items():
        mu, sigma = dissimilarity(points, graph)
        stats[cls] = (mu, sigma, len(points))
    sims = similarities({cls: mu for cls, (mu, _, _) in stats.items()}) \
        if stats else {}
    rows = {
        cls: ClassRow(mu=mu, sigma=sigma, similarity=sims[cls], n_events=n)
        for cls, (mu, sigma, n) in stats.items()
    }
    lead_stats = lead_times(lead_events, graph) if lead_events else None
    return SimilarityReport(rows=rows, lead_time_stats=lead_stats)


def report_to_csv(report: SimilarityReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["class", "mu", "sigma", "similarity", "n_events"])
    for cls in sorted(report.rows, key=lambda c: c.value):
        row = report.rows[cls]
        writer.writerow([cls.value, repr(row.mu), repr(row.sigma),
                         repr(row.similarity), row.n_events])
    return buf.getvalue()


def report_to_json(report: SimilarityReport) -> dict:
    payload: dict = {
        "classes": {
            cls.value: {
                "mu": row.mu,
                "sigma": row.sigma,
                "similarity": row.similarity,
                "n_events": row.n_events,
            }
            for cls, row in sorted(report.rows.items(), key=lambda kv: kv[0].value)
        }
    }
    if report.lead_time_stats is not None:
        s = report.lead_time_stats
        payload["lead_times"] = {
            "n_events": s.n_events,
            "n_early": s.n_early,
            "fraction_early": s.fraction_early,
            "mean_lead_minutes": s.mean_lead_minutes,
        }
    return payload


def records_to_jsonl(records: Iterable[AuthorityRecord]) -> str:
    lines = []
    for r in records:
        lines.append(json.dumps({
            "kind": r.kind.value,
            "lat": r.location.lat,
            "lon": r.location.lon,
            "timestamp": format_timestamp(r.timestamp),
            "category": r.category,
            "source_id": r.source_id,
        }, ensure_ascii=False))
    return "\n".join(lines) + "\n" if lines else ""


def records_from_jsonl(text: str) -> list[AuthorityRecord]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            out.append(AuthorityRecord(
                kind=RecordKind(d["kind"]),
                location=GeoPoint(float(d["lat"]), float(d["lon"])),
                timestamp=parse_timestamp(d["timestamp"]),
                category=str(d.get("category", "")),
                source_id=str(d.get("source_id", f"line-{lineno}")),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"line {lineno}: bad record: {exc}") from None
    return out
