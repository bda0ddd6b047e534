"""Report outputs: delimited annotation files and rendered figures.

Figures use the Agg backend so rendering works headless; each helper
writes one PNG and returns its path.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import FormatError
from .geo import CityFrame
from .impact import EventAnnotation, annotation_from_dict, annotation_to_dict
from .pipeline import class_histogram
from .similarity import SimilarityReport
from .text import EVENT_CLASS_ORDER, EventClass, format_timestamp

ANNOTATION_CSV_FIELDS = [
    "tweet_id", "time", "classes", "lat", "lon", "location_text",
    "severity", "likelihood", "impact", "text",
]


def annotations_to_jsonl(annotations: Iterable[EventAnnotation]) -> str:
    lines = [json.dumps(annotation_to_dict(a), ensure_ascii=False)
             for a in annotations]
    return "\n".join(lines) + "\n" if lines else ""


def annotations_from_jsonl(text: str) -> list[EventAnnotation]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(annotation_from_dict(json.loads(line)))
        except (json.JSONDecodeError, FormatError) as exc:
            raise FormatError(f"line {lineno}: bad annotation: {exc}") from None
    return out


def annotations_to_csv(annotations: Iterable[EventAnnotation]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ANNOTATION_CSV_FIELDS)
    for a in annotations:
        loc = a.resolved_location
        writer.writerow([
            a.tweet_id,
            format_timestamp(a.tweet_time),
            ";".join(sorted(c.value for c in a.event_types)),
            "" if loc is None else repr(loc.lat),
            "" if loc is None else repr(loc.lon),
            a.location_text or "",
            "" if a.severity is None else a.severity,
            "" if a.likelihood is None else repr(a.likelihood),
            "" if a.impact is None else repr(a.impact),
            a.text,
        ])
    return buf.getvalue()


def _class_colors() -> dict[EventClass, str]:
    palette = plt.get_cmap("tab10")
    return {cls: palette(i % 10) for i, cls in enumerate(EVENT_CLASS_ORDER)}


def histogram_figure(annotations: Sequence[EventAnnotation],
                     path: str | Path) -> Path:
    """Bar chart of class counts over the given annotations."""
    counts = class_histogram(annotations)
    classes = [cls for cls in EVENT_CLASS_ORDER if cls in counts]
    values = [counts[cls] for cls in classes]
    colors = _class_colors()

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(range(len(classes)), values,
           color=[colors[c] for c in classes])
    ax.set_xticks(range(len(classes)))
    ax.set_xticklabels([c.value for c in classes], rotation=30, ha="right")
    ax.set_ylabel("tweets")
    ax.set_title("Event class distribution")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def similarity_figure(report: SimilarityReport, path: str | Path) -> Path:
    """Bar chart of per-class similarity against authority records."""
    classes = sorted(report.rows, key=lambda c: report.rows[c].similarity,
                     reverse=True)
    values = [report.rows[c].similarity for c in classes]
    colors = _class_colors()

    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.bar(range(len(classes)), values,
           color=[colors[c] for c in classes])
    ax.set_xticks(range(len(classes)))
    ax.set_xticklabels([c.value for c in classes], rotation=30, ha="right")
    ax.set_ylim(0, 1)
    ax.set_ylabel("similarity")
    ax.set_title("Similarity to authority records")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def map_figure(annotations: Sequence[EventAnnotation], frame: CityFrame,
               path: str | Path) -> Path:
    """Scatter of located annotations inside the city bounding box."""
    colors = _class_colors()
    fig, ax = plt.subplots(figsize=(8, 6))

    sw, ne = frame.bbox_sw, frame.bbox_ne
    ax.plot([sw.lon, ne.lon, ne.lon, sw.lon, sw.lon],
            [sw.lat, sw.lat, ne.lat, ne.lat, sw.lat],
            color="0.6", linewidth=1, linestyle="--", label="_frame")
    ax.plot([frame.centre.lon], [frame.centre.lat], marker="+",
            color="black", markersize=10, label="_centre")

    seen = set()
    for a in annotations:
        loc = a.resolved_location
        if loc is None:
            continue
        cls = sorted(a.event_types, key=lambda c: c.value)[0]
        label = cls.value if cls not in seen else "_"
        seen.add(cls)
        ax.scatter([loc.lon], [loc.lat], color=colors[cls], s=24,
                   label=label, alpha=0.8)

    ax.set_xlabel("longitude")
    ax.set_ylabel("latitude")
    ax.set_title("Located events")
    if seen:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_figures(outdir: str | Path,
                   annotations: Sequence[EventAnnotation],
                   frame: CityFrame,
                   report: SimilarityReport | None = None) -> list[Path]:
    """Render every applicable figure into a directory."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = [
        histogram_figure(annotations, outdir / "class_histogram.png"),
        map_figure(annotations, frame, outdir / "event_map.png"),
    ]
    if report is not None and report.rows:
        written.append(similarity_figure(report, outdir / "similarity.png"))
    return written
