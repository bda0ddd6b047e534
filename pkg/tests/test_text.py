import pytest
from hypothesis import given, strategies as st

from urbanpulse.errors import EmptyTextError, FormatError
from urbanpulse.text import (
    BioTag, EventClass, NerSpan, PhraseMatcher, SPAN_CLASSES, TAG_SET,
    load_dictionaries, mask_mentions, parse_dictionary, parse_timestamp,
    spans_from_tags, tags_from_spans, tokenize, word_shape,
)


def texts(tokens):
    return [str(t) for t in tokens]


class TestTokenize:
    def test_basic_sentence(self):
        toks = tokenize("Traffic at 10pm on A40")
        assert texts(toks) == ["traffic", "at", "<number>", "pm", "on", "a40"]
        assert toks[2].raw == "10"
        assert toks[2].kind == "number"
        assert toks[5].kind == "word"

    def test_mention_and_hashtag(self):
        toks = tokenize("@alice loving #StreetFood here")
        assert texts(toks) == ["alice", "loving", "streetfood", "here"]
        assert toks[0].kind == "mention"
        assert toks[0].raw == "@alice"
        assert toks[0].surface == "alice"
        assert toks[2].kind == "hashtag"
        assert toks[2].raw == "#StreetFood"

    def test_url_sentinel(self):
        toks = tokenize("see https://example.com/x?a=1 now")
        assert texts(toks) == ["see", "<url>", "now"]
        assert toks[1].raw == "https://example.com/x?a=1"

    def test_punctuation_split(self):
        toks = tokenize("Fire!! (again)")
        assert texts(toks) == ["fire", "!", "!", "(", "again", ")"]
        assert all(t.kind == "punct" for t in toks if len(t) == 1 and not t.isalpha())

    def test_longer_sentence_token_count(self):
        toks = tokenize("seeing someone being given a parking ticket")
        assert texts(toks) == [
            "seeing", "someone", "being", "given", "a", "parking", "ticket"]

    def test_empty_raises(self):
        with pytest.raises(EmptyTextError):
            tokenize("")
        with pytest.raises(EmptyTextError):
            tokenize("   \n\t ")

    def test_tokens_are_strings(self):
        toks = tokenize("Rainbow food @ The Good Life Eatery")
        assert all(isinstance(t, str) for t in toks)
        assert texts(toks) == ["rainbow", "food", "@", "the", "good", "life", "eatery"]

    @given(st.text(min_size=1))
    def test_never_returns_empty_tokens(self, s):
        try:
            toks = tokenize(s)
        except EmptyTextError:
            return
        assert toks
        assert all(len(t) > 0 for t in toks)

    @given(st.lists(st.sampled_from(["road", "closed", "rain", "a40", "fog"]),
                    min_size=1, max_size=8))
    def test_simple_words_round_trip(self, words):
        assert texts(tokenize(" ".join(words))) == words


class TestWordShape:
    def test_shapes(self):
        assert word_shape("LONDON") == "allcaps"
        assert word_shape("London") == "cap"
        assert word_shape("A40") == "digit"
        assert word_shape("10pm") == "digit"
        assert word_shape("road") == "other"
        assert word_shape("@") == "other"


class TestMaskMentions:
    def test_masks_handles(self):
        assert mask_mentions("@alice meet @bob_2 now") == "@▮ meet @▮ now"

    def test_leaves_plain_text(self):
        s = "no handles here, just an email-free sentence"
        assert mask_mentions(s) == s


class TestBioTags:
    def test_tag_set_layout(self):
        assert len(TAG_SET) == 17
        assert str(TAG_SET[0]) == "O"
        assert str(TAG_SET[1]) == "B-Crime"
        assert str(TAG_SET[2]) == "I-Crime"
        assert str(TAG_SET[15]) == "B-Location"
        assert str(TAG_SET[16]) == "I-Location"

    def test_parse_round_trip(self):
        for tag in TAG_SET:
            assert BioTag.parse(str(tag)) == tag

    def test_parse_rejects_junk(self):
        for bad in ["B", "B-", "X-Crime", "B-Nonsense", "", "o"]:
            with pytest.raises(FormatError):
                BioTag.parse(bad)

    def test_o_cannot_carry_class(self):
        with pytest.raises(FormatError):
            BioTag("O", EventClass.CRIME)
        with pytest.raises(FormatError):
            BioTag("B", None)


class TestSpans:
    def test_spans_from_tags(self):
        tags = [BioTag.parse(s) for s in
                ["O", "B-Sport", "I-Sport", "O", "B-Location", "O"]]
        spans = spans_from_tags(tags)
        assert spans == [NerSpan(EventClass.SPORT, 1, 3),
                         NerSpan(EventClass.LOCATION, 4, 5)]

    def test_orphan_inside_becomes_begin(self):
        tags = [BioTag.parse(s) for s in ["O", "I-Food", "I-Food", "O"]]
        assert spans_from_tags(tags) == [NerSpan(EventClass.FOOD, 1, 3)]

    def test_class_change_splits_span(self):
        tags = [BioTag.parse(s) for s in ["B-Food", "I-Sport"]]
        assert spans_from_tags(tags) == [
            NerSpan(EventClass.FOOD, 0, 1), NerSpan(EventClass.SPORT, 1, 2)]

    def test_tags_from_spans_rejects_overlap(self):
        spans = [NerSpan(EventClass.FOOD, 0, 2), NerSpan(EventClass.SPORT, 1, 3)]
        with pytest.raises(FormatError):
            tags_from_spans(spans, 4)

    def test_tags_from_spans_rejects_out_of_bounds(self):
        with pytest.raises(FormatError):
            tags_from_spans([NerSpan(EventClass.FOOD, 2, 5)], 4)

    @given(st.lists(st.sampled_from([str(t) for t in TAG_SET]), min_size=1, max_size=12))
    def test_round_trip_is_stable(self, tag_names):
        tags = [BioTag.parse(s) for s in tag_names]
        spans = spans_from_tags(tags)
        rebuilt = tags_from_spans(spans, len(tags))
        # re-encoding a decoded sequence is a fixed point
        assert spans_from_tags(rebuilt) == spans
        assert tags_from_spans(spans_from_tags(rebuilt), len(tags)) == rebuilt


class TestDictionaries:
    def test_parse_dictionary_trims_and_dedupes(self):
        d = parse_dictionary(EventClass.FOOD, [
            "# test source",
            "the sunday roast",
            "Sunday Roast",
            "",
            "# another comment",
            "pizza",
            "of the and",
        ])
        assert d.source == "test source"
        assert d.phrases == (("sunday", "roast"), ("pizza",))

    def test_shipped_dictionaries_load(self):
        import urbanpulse
        from pathlib import Path
        data_dir = Path(urbanpulse.__file__).parent / "data" / "dictionaries"
        dicts = load_dictionaries(data_dir)
        assert set(dicts) == set(SPAN_CLASSES)
        for cls, d in dicts.items():
            assert len(d.phrases) >= 30, f"{cls} dictionary too small"
            assert d.source

    def test_matcher_finds_phrases(self):
        dicts = [
            parse_dictionary(EventClass.TRANSPORTATION, ["road closed", "traffic"]),
            parse_dictionary(EventClass.LOCATION, ["oxford street"]),
        ]
        matcher = PhraseMatcher(dicts)
        toks = tokenize("Traffic on Oxford Street, road closed until 9")
        hits = matcher.find(toks)
        assert (EventClass.TRANSPORTATION, 0, 1) in hits
        assert (EventClass.LOCATION, 2, 4) in hits
        assert (EventClass.TRANSPORTATION, 5, 7) in hits

    def test_matcher_prefers_reporting_all_hits(self):
        dicts = [parse_dictionary(EventClass.FOOD, ["street food", "food"])]
        matcher = PhraseMatcher(dicts)
        hits = matcher.find(["street", "food"])
        assert (EventClass.FOOD, 0, 2) in hits
        assert (EventClass.FOOD, 1, 2) in hits


class TestTimestamps:
    def test_parse_z_suffix(self):
        dt = parse_timestamp("2016-02-03T19:30:00Z")
        assert dt.utcoffset().total_seconds() == 0
        assert dt.hour == 19

    def test_parse_offset_normalizes_to_utc(self):
        dt = parse_timestamp("2016-02-03T19:30:00+01:00")
        assert dt.hour == 18

    def test_bad_timestamp(self):
        with pytest.raises(FormatError):
            parse_timestamp("yesterday-ish")
