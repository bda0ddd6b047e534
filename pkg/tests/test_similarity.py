import math
from datetime import datetime, timedelta, timezone

import pytest

from urbanpulse.corpus import generate_lead_time_stream
from urbanpulse.errors import EmptyGraphError, ShapeError
from urbanpulse.geo import CartesianPoint, GeoPoint, LONDON, to_cartesian
from urbanpulse.impact import EventAnnotation
from urbanpulse.similarity import (
    AuthorityRecord, EventGraph, GraphNode, LAMBDA_FLOOR_M, RecordKind,
    build_graph, build_report, dissimilarity, lead_times, records_from_jsonl,
    records_to_jsonl, report_to_csv, report_to_json, similarities,
    weighted_min, weighted_min_cart,
)
from urbanpulse.text import EventClass


def chord(a: GeoPoint, b: GeoPoint) -> float:
    return to_cartesian(a).distance_to(to_cartesian(b))

T0 = datetime(2016, 2, 3, 18, 0, 0, tzinfo=timezone.utc)


def record(lat, lon, minutes=0.0, kind=RecordKind.TRAFFIC, category="works",
           source_id="r"):
    return AuthorityRecord(kind=kind, location=GeoPoint(lat, lon),
                           timestamp=T0 + timedelta(minutes=minutes),
                           category=category, source_id=source_id)


def event(tweet_id, lat, lon, classes=(EventClass.TRANSPORTATION,),
          minutes=0.0):
    return EventAnnotation(
        tweet_id=tweet_id, text=tweet_id, event_types=frozenset(classes),
        tweet_time=T0 + timedelta(minutes=minutes),
        tweet_geo=GeoPoint(lat, lon))


class TestBuildGraph:
    def test_empty_rejected(self):
        with pytest.raises(EmptyGraphError):
            build_graph([], LONDON.centre)

    def test_lambda_is_distance_to_centre(self):
        r = record(51.52, -0.10)
        graph = build_graph([r], LONDON.centre)
        assert graph.nodes[0].lam == chord(r.location, LONDON.centre)

    def test_lambda_floor_at_centre(self):
        r = record(LONDON.centre.lat, LONDON.centre.lon)
        graph = build_graph([r], LONDON.centre)
        assert graph.nodes[0].lam == LAMBDA_FLOOR_M


class TestWeightedMin:
    def test_picks_smallest_ratio(self):
        # nearer node has a tiny lambda, so the farther one can win
        near = record(51.5078, -0.1280, source_id="near")
        far = record(51.60, 0.10, source_id="far")
        graph = build_graph([near, far], LONDON.centre)
        probe = GeoPoint(51.595, 0.095)
        ratio, node = weighted_min(probe, graph)
        expected = min(chord(probe, r.location) /
                       max(chord(r.location, LONDON.centre), LAMBDA_FLOOR_M)
                       for r in (near, far))
        assert ratio == expected
        assert node is graph.nodes[1]

    def test_zero_at_node(self):
        r = record(51.52, -0.10)
        graph = build_graph([r], LONDON.centre)
        ratio, _ = weighted_min(r.location, graph)
        assert ratio == 0.0


class TestDissimilarity:
    def test_brute_force_oracle(self):
        # 5 events, 3 nodes: mirror the double loop by hand
        nodes = [record(51.50, -0.10, source_id="a"),
                 record(51.55, 0.00, source_id="b"),
                 record(51.45, -0.30, source_id="c")]
        graph = build_graph(nodes, LONDON.centre)
        events = [event(f"e{i}", lat, lon) for i, (lat, lon) in enumerate(
            [(51.51, -0.11), (51.54, -0.02), (51.46, -0.28),
             (51.50, -0.20), (51.58, 0.05)])]

        ratios = []
        for e in events:
            loc = e.resolved_location
            best = math.inf
            for r in nodes:
                lam = max(chord(r.location, LONDON.centre), 1.0)
                best = min(best, chord(loc, r.location) / lam)
            ratios.append(best)
        want_mu = sum(ratios) / len(ratios)
        want_sigma = sum((x - want_mu) ** 2 for x in ratios) / len(ratios)

        mu, sigma = dissimilarity(events, graph)
        assert mu == pytest.approx(want_mu, rel=1e-12)
        assert sigma == pytest.approx(want_sigma, rel=1e-12)

    def test_node_permutation_invariant(self):
        nodes = [record(51.50, -0.10), record(51.55, 0.00),
                 record(51.45, -0.30)]
        events = [event("e", 51.52, -0.15), event("f", 51.48, -0.25)]
        a = dissimilarity(events, build_graph(nodes, LONDON.centre))
        b = dissimilarity(events, build_graph(nodes[::-1], LONDON.centre))
        assert a == pytest.approx(b)

    def test_added_node_never_increases_mu(self):
        base = [record(51.50, -0.10)]
        events = [event("e", 51.52, -0.15), event("f", 51.48, -0.25)]
        mu_one, _ = dissimilarity(events, build_graph(base, LONDON.centre))
        extra = base + [record(51.49, -0.22)]
        mu_two, _ = dissimilarity(events, build_graph(extra, LONDON.centre))
        assert mu_two <= mu_one + 1e-12

    def test_no_located_events_rejected(self):
        graph = build_graph([record(51.5, -0.1)], LONDON.centre)
        bare = EventAnnotation("x", "t", frozenset([EventClass.FOOD]), T0)
        with pytest.raises(ShapeError):
            dissimilarity([bare], graph)

    def test_scale_homogeneity(self):
        # scaling all Cartesian coordinates about the centre multiplies
        # every distance and every lambda by the same factor, so the
        # weighted ratios (hence mu) never move
        centre = to_cartesian(LONDON.centre)

        def scaled(p: CartesianPoint, s: float) -> CartesianPoint:
            return CartesianPoint(centre.x + (p.x - centre.x) * s,
                                  centre.y + (p.y - centre.y) * s,
                                  centre.z + (p.z - centre.z) * s)

        base = build_graph([record(51.55, 0.00), record(51.46, -0.25),
                            record(51.52, 0.10)], LONDON.centre)
        probes = [to_cartesian(GeoPoint(51.53, -0.05)),
                  to_cartesian(GeoPoint(51.48, -0.20)),
                  to_cartesian(GeoPoint(51.58, 0.08))]
        baseline = [weighted_min_cart(p, base)[0] for p in probes]

        for s in (0.5, 3.0, 17.25):
            nodes = tuple(
                GraphNode(point=scaled(n.point, s), timestamp=n.timestamp,
                          category=n.category, lam=n.lam * s)
                for n in base.nodes)
            graph = EventGraph(nodes=nodes, centre=centre)
            for want, p in zip(baseline, probes):
                got = weighted_min_cart(scaled(p, s), graph)[0]
                assert got == pytest.approx(want, abs=1e-9)


class TestSimilarities:
    def test_rescaling_table(self):
        mus = {
            EventClass.TRANSPORTATION: 1.73,
            EventClass.SOCIAL: 2.00,
            EventClass.FOOD: 2.95,
            EventClass.CULTURAL: 3.0,
            EventClass.SPORT: 3.60,
            EventClass.WEATHER: 3.77,
            EventClass.CRIME: 5.26,
        }
        want = {
            EventClass.TRANSPORTATION: 0.67,
            EventClass.SOCIAL: 0.60,
            EventClass.FOOD: 0.44,
            EventClass.CULTURAL: 0.41,
            EventClass.SPORT: 0.32,
            EventClass.WEATHER: 0.28,
            EventClass.CRIME: 0.00,
        }
        sims = similarities(mus)
        for cls, expected in want.items():
            assert sims[cls] == pytest.approx(expected, abs=0.03)
        assert sims[EventClass.CRIME] == 0.0

    def test_all_zero_mu(self):
        sims = similarities({EventClass.FOOD: 0.0, EventClass.SPORT: 0.0})
        assert sims == {EventClass.FOOD: 0.0, EventClass.SPORT: 0.0}

    def test_bounds(self):
        sims = similarities({EventClass.FOOD: 0.1, EventClass.SPORT: 9.0})
        for value in sims.values():
            assert 0.0 <= value <= 1.0


class TestLeadTimes:
    def test_single_early_event(self):
        r = record(51.52, -0.10, minutes=10)
        graph = build_graph([r], LONDON.centre)
        e = event("e", 51.52, -0.10, minutes=0)
        stats = lead_times([e], graph)
        assert stats.n_events == 1
        assert stats.n_early == 1
        assert stats.fraction_early == 1.0
        assert stats.mean_lead_minutes == pytest.approx(10.0)

    def test_late_event_counts_in_denominator_only(self):
        r = record(51.52, -0.10, minutes=0)
        graph = build_graph([r], LONDON.centre)
        early = event("e", 51.52, -0.10, minutes=-10)
        late = event("l", 51.52, -0.10, minutes=30)
        stats = lead_times([early, late], graph)
        assert stats.n_events == 2
        assert stats.n_early == 1
        assert stats.fraction_early == 0.5
        assert stats.mean_lead_minutes == pytest.approx(10.0)

    def test_no_early_events(self):
        r = record(51.52, -0.10, minutes=0)
        graph = build_graph([r], LONDON.centre)
        late = event("l", 51.52, -0.10, minutes=5)
        stats = lead_times([late], graph)
        assert stats.n_early == 0
        assert stats.mean_lead_minutes is None

    def test_calibrated_stream_is_exact(self):
        events, records = generate_lead_time_stream(seed=7, frame=LONDON,
                                                    start=T0)
        graph = build_graph(records, LONDON.centre)
        stats = lead_times(events, graph)
        assert stats.n_events == 1000
        assert stats.fraction_early == 0.495
        assert stats.mean_lead_minutes == 297.5


class TestReport:
    def make_report(self):
        nodes = [record(51.50, -0.10), record(51.55, 0.00)]
        graph = build_graph(nodes, LONDON.centre)
        events = [
            event("a", 51.51, -0.11, classes=(EventClass.TRANSPORTATION,)),
            event("b", 51.54, -0.02, classes=(EventClass.TRANSPORTATION,)),
            event("c", 51.46, -0.28, classes=(EventClass.FOOD,)),
            event("d", 51.58, 0.05, classes=(EventClass.OTHER,)),
        ]
        return build_report(events, graph)

    def test_rows_per_class(self):
        report = self.make_report()
        assert set(report.rows) == {EventClass.TRANSPORTATION, EventClass.FOOD}
        assert report.rows[EventClass.TRANSPORTATION].n_events == 2
        assert report.rows[EventClass.FOOD].n_events == 1

    def test_similarity_consistent_with_mu(self):
        report = self.make_report()
        mus = {c: r.mu for c, r in report.rows.items()}
        sims = similarities(mus)
        for cls, row in report.rows.items():
            assert row.similarity == pytest.approx(sims[cls])

    def test_csv_shape(self):
        text = report_to_csv(self.make_report())
        lines = text.strip().splitlines()
        assert lines[0] == "class,mu,sigma,similarity,n_events"
        assert len(lines) == 3
        names = [line.split(",")[0] for line in lines[1:]]
        assert names == sorted(names)

    def test_json_shape(self):
        data = report_to_json(self.make_report())
        assert set(data["classes"]) == {"Transportation", "Food"}
        row = data["classes"]["Food"]
        assert set(row) == {"mu", "sigma", "similarity", "n_events"}

    def test_lead_section_optional(self):
        report = self.make_report()
        assert report.lead_time_stats is None
        assert "lead_times" not in report_to_json(report)


class TestRecordsJsonl:
    def test_round_trip(self):
        records = [record(51.52, -0.10, source_id="x"),
                   record(51.45, 0.02, minutes=5.0,
                          kind=RecordKind.SOCIOCULTURAL,
                          category="concert", source_id="y")]
        text = records_to_jsonl(records)
        back = records_from_jsonl(text)
        assert back == records

    def test_bad_line(self):
        from urbanpulse.errors import FormatError
        with pytest.raises(FormatError):
            records_from_jsonl('{"kind": "Traffic"}\n')
