"""HTTP service: windowed GeoJSON events, histograms, and annotation intake.

The app serves immutable snapshots produced by a SnapshotStore; a
background refresher tails the replay file and swaps a new snapshot on
the configured cadence, so requests never observe a half-built window.
"""

from __future__ import annotations

import datetime as dt
import json
import threading
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .errors import FormatError
from .impact import annotation_properties
from .ingest import ReplayStats, StreamConfig
from .pipeline import Pipeline, SnapshotStore, emit_geojson
from .text import annotated_from_dict, annotated_to_dict, tweet_from_dict

GEOJSON_MEDIA_TYPE = "application/geo+json"


def create_app(store: SnapshotStore, corpus_path: str | Path) -> FastAPI:
    app = FastAPI(title="urbanpulse", docs_url=None, redoc_url=None)
    corpus_path = Path(corpus_path)
    corpus_lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request,
                                  exc: RequestValidationError):
        detail = [
            {"field": ".".join(str(piece) for piece in err.get("loc", ())),
             "message": err.get("msg", "invalid value")}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.get("/health")
    def health():
        snapshot = store.current()
        return {
            "status": "ok",
            "window_annotations": (len(snapshot.annotations)
                                   if snapshot else 0),
        }

    @app.get("/events")
    def events(minutes: float = Query(default=60, gt=0, le=60)):
        collection = emit_geojson(store.window(minutes))
        return JSONResponse(content=collection, media_type=GEOJSON_MEDIA_TYPE)

    @app.get("/histogram")
    def histogram(date: str = Query(default=None)):
        if date is None:
            day = dt.datetime.now(dt.timezone.utc).date()
        else:
            try:
                day = dt.date.fromisoformat(date)
            except ValueError:
                return JSONResponse(
                    status_code=400,
                    content={"detail": [{"field": "date",
                                         "message": "expected YYYY-MM-DD"}]})
        counts = store.histogram(day)
        return {"date": day.isoformat(),
                "counts": {cls.value: n for cls, n in
                           sorted(counts.items(), key=lambda kv: kv[0].value)}}

    @app.get("/timeline")
    def timeline(limit: int = Query(default=20, ge=1, le=1000)):
        return {"annotations": [annotation_properties(a)
                                for a in store.timeline(limit)]}

    @app.post("/annotations", status_code=201)
    async def post_annotation(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return JSONResponse(
                status_code=400,
                content={"detail": [{"field": "", "message": "invalid JSON"}]})
        try:
            annotated = annotated_from_dict(body)
        except FormatError as exc:
            return JSONResponse(
                status_code=400,
                content={"detail": [{"field": "annotation",
                                     "message": str(exc)}]})
        stored = annotated_to_dict(annotated)
        line = json.dumps(stored, ensure_ascii=False)
        with corpus_lock:
            corpus_path.parent.mkdir(parents=True, exist_ok=True)
            with open(corpus_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        return stored

    return app


class StreamRefresher(threading.Thread):
    """Tails a replay file and swaps store snapshots on a fixed cadence."""

    def __init__(self, pipeline: Pipeline, store: SnapshotStore,
                 stream_path: str | Path,
                 stream_filter: StreamConfig | None = None,
                 interval_seconds: float = 60.0):
        super().__init__(daemon=True)
        self._pipeline = pipeline
        self._store = store
        self._path = Path(stream_path)
        self._filter = stream_filter or StreamConfig()
        self._interval = interval_seconds
        self._offset = 0
        self._stop = threading.Event()
        self.stats = ReplayStats()

    def tick(self) -> int:
        """Ingest newly appended tweets and publish a fresh snapshot."""
        new = []
        if self._path.is_file():
            with open(self._path, encoding="utf-8") as fh:
                fh.seek(self._offset)
                chunk = fh.read()
                self._offset = fh.tell()
            if chunk:
                for line in chunk.splitlines():
                    if not line.strip():
                        continue
                    try:
                        tweet = tweet_from_dict(json.loads(line))
                    except (json.JSONDecodeError, FormatError):
                        self.stats.skipped += 1
                        continue
                    if self._filter.matches(tweet):
                        self.stats.emitted += 1
                        new.append(tweet)
                    else:
                        self.stats.filtered += 1
        if new:
            self._store.extend(self._pipeline.annotate(t) for t in new)
        self._store.swap()
        return len(new)

    def run(self):
        self.tick()
        while not self._stop.wait(self._interval):
            self.tick()

    def stop(self):
        self._stop.set()
