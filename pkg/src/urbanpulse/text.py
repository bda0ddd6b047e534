"""Tokenization, tag vocabularies, class dictionaries, and corpus files.

Everything downstream (taggers, fusion, pipeline) speaks in the types
defined here: Token sequences, BioTag sequences over the event classes,
and the annotated-tweet corpus format.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import ConfigError, EmptyTextError, FormatError
from .geo import GeoPoint


class EventClass(str, Enum):
    CRIME = "Crime"
    CULTURAL = "Cultural"
    FOOD = "Food"
    SOCIAL = "Social"
    SPORT = "Sport"
    WEATHER = "Weather"
    TRANSPORTATION = "Transportation"
    LOCATION = "Location"
    OTHER = "Other"

    def __str__(self) -> str:
        return self.value


# Classes that can appear as tagged spans inside a tweet, in canonical order.
SPAN_CLASSES: tuple[EventClass, ...] = (
    EventClass.CRIME, EventClass.CULTURAL, EventClass.FOOD, EventClass.SOCIAL,
    EventClass.SPORT, EventClass.WEATHER, EventClass.TRANSPORTATION,
    EventClass.LOCATION,
)

# Event categories a whole tweet can be assigned to (Location is a span-only
# class; Other is the non-event bucket and never carries spans).
CATEGORY_CLASSES: tuple[EventClass, ...] = tuple(
    c for c in SPAN_CLASSES if c is not EventClass.LOCATION
)

EVENT_CLASS_ORDER: tuple[EventClass, ...] = SPAN_CLASSES + (EventClass.OTHER,)


@dataclass(frozen=True)
class BioTag:
    """A BIO tag: O, or B-/I- paired with a span class."""

    prefix: str
    event_class: EventClass | None = None

    def __post_init__(self):
        if self.prefix not in ("O", "B", "I"):
            raise FormatError(f"bad BIO prefix {self.prefix!r}")
        if self.prefix == "O":
            if self.event_class is not None:
                raise FormatError("O tag cannot carry an event class")
        else:
            if self.event_class is None:
                raise FormatError(f"{self.prefix} tag needs an event class")
            if self.event_class not in SPAN_CLASSES:
                raise FormatError(f"{self.event_class} is not a span class")

    @property
    def is_outside(self) -> bool:
        return self.prefix == "O"

    def __str__(self) -> str:
        if self.prefix == "O":
            return "O"
        return f"{self.prefix}-{self.event_class.value}"

    @classmethod
    def parse(cls, s: str) -> "BioTag":
        if s == "O":
            return cls("O")
        if len(s) > 2 and s[0] in ("B", "I") and s[1] == "-":
            try:
                return cls(s[0], EventClass(s[2:]))
            except ValueError:
                raise FormatError(f"unknown event class in tag {s!r}") from None
        raise FormatError(f"unparseable BIO tag {s!r}")


OUTSIDE = BioTag("O")

# Canonical 17-tag order: O first, then B/I per span class.
TAG_SET: tuple[BioTag, ...] = (OUTSIDE,) + tuple(
    BioTag(prefix, c) for c in SPAN_CLASSES for prefix in ("B", "I")
)
TAG_INDEX: dict[BioTag, int] = {t: i for i, t in enumerate(TAG_SET)}

# Universal part-of-speech inventory used by the neural tagger.
POS_TAGS: tuple[str, ...] = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)

# Entity inventory for the neural tagger's second output head.
ENTITY_TAGS: tuple[str, ...] = ("O", "B-LOC", "I-LOC", "B-ORG", "I-ORG")


URL_TOKEN = "<url>"
NUMBER_TOKEN = "<number>"


class Token(str):
    """A lowercase token that remembers its original surface and kind.

    Behaves as a plain string (the normalized text) so downstream code can
    treat token sequences as sequences of str.
    """

    __slots__ = ("raw", "kind")

    def __new__(cls, text: str, raw: str | None = None, kind: str = "word"):
        tok = super().__new__(cls, text)
        tok.raw = raw if raw is not None else text
        tok.kind = kind
        return tok

    @property
    def surface(self) -> str:
        """Original surface with any @/# sigil removed."""
        if self.kind in ("mention", "hashtag"):
            return self.raw[1:]
        return self.raw


_TOKEN_RE = re.compile(
    r"""(?P<url>https?://\S+|www\.\S+)
      | (?P<mention>@\w+)
      | (?P<hashtag>\#\w+)
      | (?P<word>[^\W\d_][^\W_]*)
      | (?P<number>\d+)
      | (?P<punct>\S)
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    """Split a tweet into normalized tokens.

    Lowercases words, replaces URLs and bare digit runs with sentinel
    tokens, and strips the @/# sigil from mentions and hashtags while
    keeping the original surface on the token.
    """
    if not text or not text.strip():
        raise EmptyTextError("cannot tokenize empty text")
    out: list[Token] = []
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        raw = m.group()
        if kind == "url":
            out.append(Token(URL_TOKEN, raw=raw, kind="url"))
        elif kind == "mention":
            out.append(Token(raw[1:].lower(), raw=raw, kind="mention"))
        elif kind == "hashtag":
            out.append(Token(raw[1:].lower(), raw=raw, kind="hashtag"))
        elif kind == "word":
            out.append(Token(raw.lower(), raw=raw, kind="word"))
        elif kind == "number":
            out.append(Token(NUMBER_TOKEN, raw=raw, kind="number"))
        else:
            out.append(Token(raw, raw=raw, kind="punct"))
    if not out:
        raise EmptyTextError("text contains no tokens")
    return out


def word_shape(surface: str) -> str:
    """Coarse orthographic shape of a surface form."""
    if any(ch.isdigit() for ch in surface):
        return "digit"
    if surface.isupper():
        return "allcaps"
    if surface[:1].isupper() and surface[1:].islower():
        return "cap"
    return "other"


_MENTION_RE = re.compile(r"@\w+")


def mask_mentions(text: str) -> str:
    """Replace every @mention handle with an opaque glyph for display."""
    return _MENTION_RE.sub("@▮", text)


STOP_WORDS = frozenset({
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "and", "or",
})


@dataclass(frozen=True)
class ClassDictionary:
    """Curated phrases signalling one event class."""

    event_class: EventClass
    phrases: tuple[tuple[str, ...], ...]
    source: str = ""


def _trim_phrase(tokens: Sequence[str]) -> tuple[str, ...]:
    start, end = 0, len(tokens)
    while start < end and tokens[start] in STOP_WORDS:
        start += 1
    while end > start and tokens[end - 1] in STOP_WORDS:
        end -= 1
    return tuple(tokens[start:end])


def parse_dictionary(event_class: EventClass, lines: Iterable[str]) -> ClassDictionary:
    """Parse one dictionary file's lines.

    Lines starting with # are comments; the first comment is kept as the
    source note. Phrases are tokenized, trimmed of leading and trailing
    stop words, and deduplicated.
    """
    source = ""
    phrases: list[tuple[str, ...]] = []
    seen: set[tuple[str, ...]] = set()
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if not source:
                source = line.lstrip("#").strip()
            continue
        phrase = _trim_phrase([str(t) for t in tokenize(line)])
        if phrase and phrase not in seen:
            seen.add(phrase)
            phrases.append(phrase)
    return ClassDictionary(event_class, tuple(phrases), source)


def load_dictionaries(directory: str | Path) -> dict[EventClass, ClassDictionary]:
    """Load the eight per-class dictionaries from `<class>.txt` files."""
    directory = Path(directory)
    out: dict[EventClass, ClassDictionary] = {}
    for cls in SPAN_CLASSES:
        path = directory / f"{cls.value.lower()}.txt"
        if not path.is_file():
            raise ConfigError(f"missing dictionary file {path}")
        out[cls] = parse_dictionary(cls, path.read_text(encoding="utf-8").splitlines())
    return out


class PhraseMatcher:
    """Exact contiguous phrase matching over token sequences."""

    def __init__(self, dictionaries: Iterable[ClassDictionary] | Mapping[EventClass, ClassDictionary]):
        if isinstance(dictionaries, Mapping):
            dictionaries = dictionaries.values()
        self._by_first: dict[str, list[tuple[tuple[str, ...], EventClass]]] = {}
        for d in dictionaries:
            for phrase in d.phrases:
                self._by_first.setdefault(phrase[0], []).append((phrase, d.event_class))
        for entries in self._by_first.values():
            # longest first so greedy consumers can take the first hit
            entries.sort(key=lambda e: (-len(e[0]), e[0]))

    def find(self, tokens: Sequence[str]) -> list[tuple[EventClass, int, int]]:
        """All dictionary hits as (event_class, start, end) with end exclusive."""
        hits: list[tuple[EventClass, int, int]] = []
        n = len(tokens)
        for i in range(n):
            entries = self._by_first.get(str(tokens[i]))
            if not entries:
                continue
            for phrase, cls in entries:
                j = i + len(phrase)
                if j <= n and tuple(str(t) for t in tokens[i:j]) == phrase:
                    hits.append((cls, i, j))
        hits.sort(key=lambda h: (h[1], h[2], EVENT_CLASS_ORDER.index(h[0])))
        return hits


@dataclass(frozen=True)
class NerSpan:
    """A tagged span over token positions, end exclusive."""

    event_class: EventClass
    start: int
    end: int

    def __post_init__(self):
        if self.event_class not in SPAN_CLASSES:
            raise FormatError(f"{self.event_class} is not a span class")
        if not (0 <= self.start < self.end):
            raise FormatError(f"bad span bounds [{self.start}, {self.end})")


def spans_from_tags(tags: Sequence[BioTag]) -> list[NerSpan]:
    """Decode BIO tags into spans.

    An I tag that does not continue a span of the same class is repaired
    by treating it as a span opener.
    """
    spans: list[NerSpan] = []
    open_class: EventClass | None = None
    open_start = 0
    for i, tag in enumerate(tags):
        if tag.prefix == "I" and tag.event_class is open_class and open_class is not None:
            continue
        if open_class is not None:
            spans.append(NerSpan(open_class, open_start, i))
            open_class = None
        if tag.prefix != "O":
            open_class = tag.event_class
            open_start = i
    if open_class is not None:
        spans.append(NerSpan(open_class, open_start, len(tags)))
    return spans


def tags_from_spans(spans: Iterable[NerSpan], length: int) -> list[BioTag]:
    """Encode non-overlapping spans as a BIO tag sequence of the given length."""
    tags = [OUTSIDE] * length
    occupied = [False] * length
    for span in spans:
        if span.end > length:
            raise FormatError(f"span [{span.start}, {span.end}) exceeds length {length}")
        if any(occupied[span.start:span.end]):
            raise FormatError(f"overlapping span at [{span.start}, {span.end})")
        for i in range(span.start, span.end):
            occupied[i] = True
            prefix = "B" if i == span.start else "I"
            tags[i] = BioTag(prefix, span.event_class)
    return tags


UTC = timezone.utc


def parse_timestamp(s: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    try:
        dt = datetime.fromisoformat(s.replace("Z", "+00:00"))
    except ValueError:
        raise FormatError(f"bad timestamp {s!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC)


def format_timestamp(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class Tweet:
    id: str
    text: str
    created_at: datetime
    geo: GeoPoint | None = None

    def __post_init__(self):
        if not self.id:
            raise FormatError("tweet id must be non-empty")
        if not self.text or not self.text.strip():
            raise FormatError(f"tweet {self.id}: empty text")
        if self.created_at.tzinfo is None:
            object.__setattr__(self, "created_at", self.created_at.replace(tzinfo=UTC))
        else:
            object.__setattr__(self, "created_at", self.created_at.astimezone(UTC))


@dataclass(frozen=True)
class AnnotatedTweet:
    """A tweet with gold category labels and optional gold BIO tags."""

    tweet: Tweet
    labels: frozenset[EventClass] = field(default_factory=frozenset)
    tags: tuple[BioTag, ...] | None = None

    def __post_init__(self):
        if not self.labels:
            raise FormatError(f"tweet {self.tweet.id}: labels must be non-empty")
        if EventClass.LOCATION in self.labels:
            raise FormatError(f"tweet {self.tweet.id}: Location is not a category label")
        if EventClass.OTHER in self.labels and len(self.labels) > 1:
            raise FormatError(f"tweet {self.tweet.id}: Other excludes all other labels")


def tweet_to_dict(t: Tweet) -> dict:
    d: dict = {"id": t.id, "text": t.text, "created_at": format_timestamp(t.created_at)}
    if t.geo is not None:
        d["lat"] = t.geo.lat
        d["lon"] = t.geo.lon
    return d


def tweet_from_dict(d: dict) -> Tweet:
    try:
        geo = None
        if "lat" in d or "lon" in d:
            geo = GeoPoint(float(d["lat"]), float(d["lon"]))
        return Tweet(
            id=str(d["id"]),
            text=d["text"],
            created_at=parse_timestamp(d["created_at"]),
            geo=geo,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad tweet record: {exc}") from None


def annotated_to_dict(a: AnnotatedTweet) -> dict:
    d = tweet_to_dict(a.tweet)
    d["labels"] = sorted(c.value for c in a.labels)
    if a.tags is not None:
        d["tags"] = [str(t) for t in a.tags]
    return d


def annotated_from_dict(d: dict) -> AnnotatedTweet:
    tweet = tweet_from_dict(d)
    try:
        labels = frozenset(EventClass(name) for name in d["labels"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"tweet {tweet.id}: bad labels: {exc}") from None
    tags = None
    if d.get("tags") is not None:
        tags = tuple(BioTag.parse(s) for s in d["tags"])
        n_tokens = len(tokenize(tweet.text))
        if len(tags) != n_tokens:
            raise FormatError(
                f"tweet {tweet.id}: {len(tags)} tags for {n_tokens} tokens")
    return AnnotatedTweet(tweet=tweet, labels=labels, tags=tags)


def read_annotated_corpus(path: str | Path) -> list[AnnotatedTweet]:
    """Read an annotated corpus from JSON-lines; malformed lines are errors."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            try:
                out.append(annotated_from_dict(record))
            except FormatError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return out


def write_annotated_corpus(path: str | Path, items: Iterable[AnnotatedTweet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in items:
            fh.write(json.dumps(annotated_to_dict(a), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class TaggedSentence:
    """One sentence of the part-of-speech and LOC/ORG entity corpus."""

    tokens: tuple[str, ...]
    pos: tuple[str, ...]
    entities: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.tokens:
            raise FormatError("sentence must have at least one token")
        if len(self.pos) != len(self.tokens):
            raise FormatError("pos labels must align with tokens")
        for p in self.pos:
            if p not in POS_TAGS:
                raise FormatError(f"unknown pos tag {p!r}")
        if self.entities is not None:
            if len(self.entities) != len(self.tokens):
                raise FormatError("entity labels must align with tokens")
            for e in self.entities:
                if e not in ENTITY_TAGS:
                    raise FormatError(f"unknown entity tag {e!r}")


def read_tag_corpus(path: str | Path) -> list[TaggedSentence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                out.append(TaggedSentence(
                    tokens=tuple(record["tokens"]),
                    pos=tuple(record["pos"]),
                    entities=tuple(record["ner"]) if record.get("ner") is not None else None,
                ))
            except (json.JSONDecodeError, KeyError, TypeError, FormatError) as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    return out


def write_tag_corpus(path: str | Path, sentences: Iterable[TaggedSentence]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            record: dict = {"tokens": list(s.tokens), "pos": list(s.pos)}
            if s.entities is not None:
                record["ner"] = list(s.entities)
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def sentence_iter(items: Iterable[AnnotatedTweet]) -> Iterator[tuple[list[Token], list[BioTag]]]:
    """Yield (tokens, tags) pairs for the tag-annotated subset of a corpus."""
    for a in items:
        if a.tags is not None:
            yield tokenize(a.tweet.text), list(a.tags)
