"""Data collectors: tweet replay, disruption feeds, and event listings.

Three sources feed the pipeline: a JSON Lines tweet file replayed
through stream-style filters, a road-disruption JSON feed normalized via
a declarative field-path mapping, and scheduled-event HTML pages parsed
with CSS-like selectors. Every timestamp is normalized to UTC before it
leaves this module, and malformed individual records are counted and
skipped rather than aborting the batch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Iterator, Mapping
from zoneinfo import ZoneInfo

from .errors import ConfigError, FormatError
from .geo import GeoPoint
from .similarity import AuthorityRecord, RecordKind
from .text import Tweet, tweet_from_dict

# Stream filter caps mirror the public filter API's request limits.
MAX_FOLLOW = 5000
MAX_TRACK = 400
MAX_LOCATIONS = 25


@dataclass(frozen=True)
class StreamConfig:
    """Filter clauses for tweet replay; a tweet passes if ANY clause matches."""

    follow: tuple[str, ...] = ()
    track: tuple[str, ...] = ()
    locations: tuple[tuple[GeoPoint, GeoPoint], ...] = ()

    def __post_init__(self):
        if len(self.follow) > MAX_FOLLOW:
            raise ConfigError(f"follow allows at most {MAX_FOLLOW} ids")
        if len(self.track) > MAX_TRACK:
            raise ConfigError(f"track allows at most {MAX_TRACK} keywords")
        if len(self.locations) > MAX_LOCATIONS:
            raise ConfigError(
                f"locations allows at most {MAX_LOCATIONS} bounding boxes")
        for sw, ne in self.locations:
            if sw.lat > ne.lat or sw.lon > ne.lon:
                raise ConfigError(
                    f"bounding box corners out of order: {sw} .. {ne}")

    @property
    def is_empty(self) -> bool:
        return not (self.follow or self.track or self.locations)

    def matches(self, tweet: Tweet) -> bool:
        if self.is_empty:
            return True
        if tweet.id in self.follow:
            return True
        text = tweet.text.lower()
        if any(keyword.lower() in text for keyword in self.track):
            return True
        if tweet.geo is not None:
            for sw, ne in self.locations:
                if (sw.lat <= tweet.geo.lat <= ne.lat
                        and sw.lon <= tweet.geo.lon <= ne.lon):
                    return True
        return False


@dataclass
class ReplayStats:
    emitted: int = 0
    filtered: int = 0
    skipped: int = 0

    @property
    def total(self) -> int:
        return self.emitted + self.filtered + self.skipped


def replay_tweets(path: str | Path, filter: StreamConfig | None = None,
                  stats: ReplayStats | None = None) -> Iterator[Tweet]:
    """Replay a JSON Lines tweet file through stream-style filters.

    Tweets come out in file order. Malformed lines are skipped and
    counted in `stats`, never raised; blank lines are ignored entirely.
    """
    if filter is None:
        filter = StreamConfig()
    if stats is None:
        stats = ReplayStats()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                tweet = tweet_from_dict(json.loads(line))
            except (json.JSONDecodeError, FormatError):
                stats.skipped += 1
                continue
            if filter.matches(tweet):
                stats.emitted += 1
                yield tweet
            else:
                stats.filtered += 1


def _get_path(obj, path: str):
    """Walk a dot-separated path through dicts and lists; KeyError if absent."""
    current = obj
    for segment in path.split("."):
        if isinstance(current, Mapping):
            current = current[segment]
        elif isinstance(current, (list, tuple)):
            current = current[int(segment)]
        else:
            raise KeyError(path)
    return current


@dataclass(frozen=True)
class DisruptionMapping:
    """Dot-paths locating each record field inside a feed item."""

    lat: str
    lon: str
    timestamp: str
    category: str
    source_id: str

    @classmethod
    def from_dict(cls, d: Mapping) -> "DisruptionMapping":
        try:
            return cls(lat=str(d["lat"]), lon=str(d["lon"]),
                       timestamp=str(d["timestamp"]),
                       category=str(d["category"]),
                       source_id=str(d["source_id"]))
        except KeyError as exc:
            raise ConfigError(f"disruption mapping missing field: {exc}") from None


def parse_disruptions(payload, mapping: DisruptionMapping
                      ) -> tuple[list[AuthorityRecord], int]:
    """Normalize a disruption feed to traffic records.

    Returns the records plus a count of items dropped for missing or
    unusable coordinates or timestamps. A non-array payload is a caller
    error and raises.
    """
    if not isinstance(payload, list):
        raise FormatError("disruption payload must be a JSON array")
    from .text import parse_timestamp

    records = []
    dropped = 0
    for item in payload:
        try:
            lat = float(_get_path(item, mapping.lat))
            lon = float(_get_path(item, mapping.lon))
            when = parse_timestamp(str(_get_path(item, mapping.timestamp)))
            location = GeoPoint(lat, lon)
        except (KeyError, IndexError, TypeError, ValueError, FormatError):
            dropped += 1
            continue
        try:
            category = str(_get_path(item, mapping.category))
        except (KeyError, IndexError, TypeError):
            category = ""
        try:
            source_id = str(_get_path(item, mapping.source_id))
        except (KeyError, IndexError, TypeError):
            source_id = f"disruption-{len(records)}"
        records.append(AuthorityRecord(
            kind=RecordKind.TRAFFIC, location=location, timestamp=when,
            category=category, source_id=source_id))
    return records, dropped


# Elements that never take children; the tree builder must not push them.
_VOID_TAGS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "source", "track", "wbr",
})


@dataclass
class HtmlNode:
    tag: str
    attrs: dict[str, str]
    children: list = field(default_factory=list)
    parent: "HtmlNode | None" = field(default=None, repr=False)

    @property
    def classes(self) -> frozenset[str]:
        return frozenset((self.attrs.get("class") or "").split())

    @property
    def text(self) -> str:
        """All descendant text, whitespace-collapsed."""
        parts = []
        stack = list(reversed(self.children))
        while stack:
            node = stack.pop()
            if isinstance(node, str):
                parts.append(node)
            else:
                stack.extend(reversed(node.children))
        return " ".join(" ".join(parts).split())

    def iter_elements(self) -> Iterator["HtmlNode"]:
        for child in self.children:
            if isinstance(child, HtmlNode):
                yield child
                yield from child.iter_elements()


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = HtmlNode(tag="#root", attrs={})
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        node = HtmlNode(tag=tag, attrs={k: (v or "") for k, v in attrs},
                        parent=self.stack[-1])
        self.stack[-1].children.append(node)
        if tag not in _VOID_TAGS:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        node = HtmlNode(tag=tag, attrs={k: (v or "") for k, v in attrs},
                        parent=self.stack[-1])
        self.stack[-1].children.append(node)

    def handle_endtag(self, tag):
        # tolerate stray or mismatched closers: pop to the nearest match
        for depth in range(len(self.stack) - 1, 0, -1):
            if self.stack[depth].tag == tag:
                del self.stack[depth:]
                return

    def handle_data(self, data):
        if data:
            self.stack[-1].children.append(data)


def parse_html(text: str) -> HtmlNode:
    builder = _TreeBuilder()
    builder.feed(text)
    builder.close()
    return builder.root


@dataclass(frozen=True)
class _SimpleSelector:
    tag: str | None
    id: str | None
    classes: frozenset[str]

    def matches(self, node: HtmlNode) -> bool:
        if self.tag is not None and node.tag != self.tag:
            return False
        if self.id is not None and node.attrs.get("id") != self.id:
            return False
        return self.classes <= node.classes


def _parse_selector(selector: str) -> list[_SimpleSelector]:
    steps = []
    for word in selector.split():
        tag = None
        sel_id = None
        classes = []
        rest = word
        if rest and rest[0] not in ".#":
            cut = len(rest)
            for i, ch in enumerate(rest):
                if ch in ".#":
                    cut = i
                    break
            tag, rest = rest[:cut].lower(), rest[cut:]
        while rest:
            sigil, rest = rest[0], rest[1:]
            cut = len(rest)
            for i, ch in enumerate(rest):
                if ch in ".#":
                    cut = i
                    break
            name, rest = rest[:cut], rest[cut:]
            if not name:
                raise ConfigError(f"bad selector: {selector!r}")
            if sigil == "#":
                sel_id = name
            else:
                classes.append(name)
        if tag is None and sel_id is None and not classes:
            raise ConfigError(f"bad selector: {selector!r}")
        steps.append(_SimpleSelector(tag=tag, id=sel_id,
                                     classes=frozenset(classes)))
    if not steps:
        raise ConfigError("empty selector")
    return steps


def select(root: HtmlNode, selector: str) -> list[HtmlNode]:
    """Find descendants matching a selector: tag, .class, #id, combinations
    of those, and space-separated descendant chains."""
    steps = _parse_selector(selector)
    out = []
    for node in root.iter_elements():
        if not steps[-1].matches(node):
            continue
        remaining = len(steps) - 2
        ancestor = node.parent
        while remaining >= 0 and ancestor is not None and ancestor is not root:
            if steps[remaining].matches(ancestor):
                remaining -= 1
            ancestor = ancestor.parent
        if remaining < 0:
            out.append(node)
    return out


def _first_text(node: HtmlNode, selector: str | None) -> str | None:
    if not selector:
        return None
    hits = select(node, selector)
    return hits[0].text if hits else None


@dataclass(frozen=True)
class ParserRules:
    """Page-specific extraction rules for scheduled-event listings."""

    record_selector: str
    name_selector: str
    venue_selector: str
    date_selector: str
    coords_selector: str | None = None
    base_url: str = ""
    timezone: str = "Europe/London"
    date_format: str = "%d %B %Y, %I:%M%p"

    def __post_init__(self):
        if not self.record_selector.strip():
            raise ConfigError("record_selector must be non-empty")
        _parse_selector(self.record_selector)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParserRules":
        try:
            return cls(
                record_selector=str(d["record_selector"]),
                name_selector=str(d["name_selector"]),
                venue_selector=str(d["venue_selector"]),
                date_selector=str(d["date_selector"]),
                coords_selector=(str(d["coords_selector"])
                                 if d.get("coords_selector") else None),
                base_url=str(d.get("base_url", "")),
                timezone=str(d.get("timezone", "Europe/London")),
                date_format=str(d.get("date_format", "%d %B %Y, %I:%M%p")),
            )
        except KeyError as exc:
            raise ConfigError(f"parser rules missing field: {exc}") from None


@dataclass(frozen=True)
class UnlocatedListing:
    name: str
    venue: str
    timestamp: datetime | None


@dataclass(frozen=True)
class ListingParse:
    """Parsed listings plus the entries that could not be placed or timed.

    `empty` flags a page where the record selector matched nothing at
    all, which usually means the page layout changed.
    """

    records: tuple[AuthorityRecord, ...]
    unlocated: tuple[UnlocatedListing, ...]
    empty: bool


def _parse_local_date(raw: str, rules: ParserRules) -> datetime | None:
    try:
        naive = datetime.strptime(" ".join(raw.split()), rules.date_format)
    except ValueError:
        return None
    local = naive.replace(tzinfo=ZoneInfo(rules.timezone))
    return local.astimezone(ZoneInfo("UTC"))


def _parse_coords(raw: str | None) -> GeoPoint | None:
    if not raw:
        return None
    parts = raw.split(",")
    if len(parts) != 2:
        return None
    try:
        return GeoPoint(float(parts[0]), float(parts[1]))
    except (ValueError, FormatError):
        return None


def parse_listings(html_text: str, rules: ParserRules,
                   gazetteer: Mapping[str, GeoPoint] | None = None
                   ) -> ListingParse:
    """Extract sociocultural event records from a listings page.

    Coordinates come from coords_selector when present, otherwise from
    gazetteer lookup on the venue text. Listings missing a usable
    location or date land in `unlocated` instead of being dropped
    silently.
    """
    from .impact import resolve_location

    root = parse_html(html_text)
    items = select(root, rules.record_selector)
    records = []
    unlocated = []
    for i, item in enumerate(items):
        name = _first_text(item, rules.name_selector) or f"listing-{i}"
        venue = _first_text(item, rules.venue_selector) or ""
        raw_date = _first_text(item, rules.date_selector) or ""
        when = _parse_local_date(raw_date, rules) if raw_date else None

        location = _parse_coords(_first_text(item, rules.coords_selector))
        if location is None and gazetteer is not None and venue:
            location = resolve_location(gazetteer, venue)

        if location is None or when is None:
            unlocated.append(UnlocatedListing(name=name, venue=venue,
                                              timestamp=when))
            continue
        records.append(AuthorityRecord(
            kind=RecordKind.SOCIOCULTURAL, location=location, timestamp=when,
            category=name, source_id=f"{rules.base_url}#listing-{i}"))
    return ListingParse(records=tuple(records), unlocated=tuple(unlocated),
                        empty=not items)


def merge_by_timestamp(*streams: Iterable[AuthorityRecord]
                       ) -> list[AuthorityRecord]:
    """Merge per-source record streams into one timestamp-ordered list.

    Inputs need not be sorted; the merge sorts stably so equal
    timestamps keep their source order.
    """
    merged = [record for stream in streams for record in stream]
    merged.sort(key=lambda r: r.timestamp)
    return merged
