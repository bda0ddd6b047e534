import { describe, expect, it } from "vitest";

import type { EventCollection, EventFeature } from "../src/types.js";
import {
  applyEvents,
  applyFetchFailure,
  boundsFromFeatures,
  clampMinutes,
  createViewState,
  histogramCounts,
  markers,
  popupContent,
  project,
  selectFeature,
  selectedFeature,
  setMinutes,
  timelineFromSnapshot,
  toggleClassFilter,
  visibleFeatures,
} from "../src/view.js";

function feature(
  id: string,
  classes: string[],
  lon: number,
  lat: number,
  extra: Partial<EventFeature["properties"]> = {},
): EventFeature {
  return {
    type: "Feature",
    geometry: { type: "Point", coordinates: [lon, lat] },
    properties: {
      tweet_id: id,
      classes,
      time: "2016-02-03T12:00:00Z",
      text: `event ${id}`,
      ...extra,
    },
  };
}

// Five located events over three classes, one of them multi-label.
function fiveFeatureCollection(): EventCollection {
  return {
    type: "FeatureCollection",
    features: [
      feature("f1", ["Crime"], -0.128, 51.508, { time: "2016-02-03T12:04:00Z" }),
      feature("f2", ["Crime"], -0.120, 51.510, { time: "2016-02-03T12:03:00Z" }),
      feature("f3", ["Transportation"], -0.135, 51.505, {
        time: "2016-02-03T12:02:00Z",
      }),
      feature("f4", ["Crime", "Transportation"], -0.126, 51.507, {
        time: "2016-02-03T12:01:00Z",
        impact: 2.25,
      }),
      feature("f5", ["Sport"], -0.131, 51.509, { time: "2016-02-03T12:00:00Z" }),
    ],
    unlocated: [],
  };
}

function loadedState(collection = fiveFeatureCollection()) {
  const state = createViewState();
  applyEvents(state, collection);
  return state;
}

function markerLabelTotal(state: ReturnType<typeof createViewState>): number {
  return markers(state, 640, 420).reduce((n, m) => n + m.labels.length, 0);
}

function histogramTotal(state: ReturnType<typeof createViewState>): number {
  return [...histogramCounts(state).values()].reduce((a, b) => a + b, 0);
}

describe("histogram and markers stay consistent", () => {
  it("five features render five markers whose labels the bars sum to", () => {
    const state = loadedState();
    const rendered = markers(state, 640, 420);
    expect(rendered).toHaveLength(5);
    const counts = histogramCounts(state);
    expect(counts.get("Crime")).toBe(3);
    expect(counts.get("Transportation")).toBe(2);
    expect(counts.get("Sport")).toBe(1);
    expect(histogramTotal(state)).toBe(markerLabelTotal(state));
    expect(histogramTotal(state)).toBe(6);
  });

  it("the invariant survives any class filter", () => {
    const state = loadedState();
    const names = ["Crime", "Transportation", "Sport", "Weather"];
    for (const subset of [["Crime"], ["Sport"], names, ["Weather"], []]) {
      state.classFilter = new Set(subset);
      expect(histogramTotal(state)).toBe(markerLabelTotal(state));
    }
  });

  it("filtering to Crime hides the Sport marker but keeps multi-label ones", () => {
    const state = loadedState();
    toggleClassFilter(state, "Crime");
    const visible = visibleFeatures(state).map((f) => f.properties.tweet_id);
    expect(visible).toEqual(["f1", "f2", "f4"]);
    expect(histogramCounts(state).get("Transportation")).toBeUndefined();
    expect(histogramTotal(state)).toBe(3);
  });

  it("an empty window yields an empty map and a zeroed histogram", () => {
    const state = loadedState({
      type: "FeatureCollection",
      features: [],
      unlocated: [],
    });
    expect(markers(state, 640, 420)).toHaveLength(0);
    expect(histogramCounts(state).size).toBe(0);
    expect(timelineFromSnapshot(state)).toHaveLength(0);
  });
});

describe("window control", () => {
  it("clamps to the service bounds", () => {
    expect(clampMinutes(0)).toBe(1);
    expect(clampMinutes(61)).toBe(60);
    expect(clampMinutes(-5)).toBe(1);
    expect(clampMinutes(30)).toBe(30);
    expect(clampMinutes(NaN)).toBe(60);
  });

  it("setMinutes stores the clamped value", () => {
    const state = createViewState();
    setMinutes(state, 999);
    expect(state.minutes).toBe(60);
    setMinutes(state, 15);
    expect(state.minutes).toBe(15);
  });
});

describe("stale snapshot handling", () => {
  it("a failed poll flags stale but keeps the last snapshot", () => {
    const state = loadedState();
    applyFetchFailure(state);
    expect(state.stale).toBe(true);
    expect(markers(state, 640, 420)).toHaveLength(5);
  });

  it("the next successful poll clears the flag", () => {
    const state = loadedState();
    applyFetchFailure(state);
    applyEvents(state, fiveFeatureCollection());
    expect(state.stale).toBe(false);
  });
});

describe("popup", () => {
  it("shows masked text, timestamp and impact", () => {
    const masked = feature("m1", ["Social"], -0.1, 51.5, {
      text: "road closed, ask @▮ for details",
      impact: 1.64,
    });
    const content = popupContent(masked);
    expect(content.text).toContain("@▮");
    expect(content.text).not.toMatch(/@[A-Za-z0-9_]/);
    expect(content.time).toBe("2016-02-03T12:00:00Z");
    expect(content.impact).toBe("impact 1.64");
  });

  it("reports unscored events as such", () => {
    const content = popupContent(feature("m2", ["Food"], 0, 0));
    expect(content.impact).toBe("unscored");
  });

  it("selection resolves back to the clicked feature", () => {
    const state = loadedState();
    selectFeature(state, "f4");
    expect(selectedFeature(state)?.properties.impact).toBe(2.25);
    selectFeature(state, "missing");
    expect(selectedFeature(state)).toBeNull();
    selectFeature(state, null);
    expect(selectedFeature(state)).toBeNull();
  });
});

describe("projection", () => {
  const bounds = { west: -1, south: 50, east: 1, north: 52 };

  it("maps the corners of the bounding box to the viewport corners", () => {
    expect(project(-1, 52, bounds, 640, 420)).toEqual({ x: 0, y: 0 });
    expect(project(1, 50, bounds, 640, 420)).toEqual({ x: 640, y: 420 });
    expect(project(0, 51, bounds, 640, 420)).toEqual({ x: 320, y: 210 });
  });

  it("derived bounds pad the feature extent", () => {
    const box = boundsFromFeatures(fiveFeatureCollection().features);
    expect(box.west).toBeLessThan(-0.135);
    expect(box.east).toBeGreaterThan(-0.120);
    expect(box.south).toBeLessThan(51.505);
    expect(box.north).toBeGreaterThan(51.510);
  });

  it("every marker lands inside the viewport", () => {
    for (const marker of markers(loadedState(), 640, 420)) {
      expect(marker.x).toBeGreaterThanOrEqual(0);
      expect(marker.x).toBeLessThanOrEqual(640);
      expect(marker.y).toBeGreaterThanOrEqual(0);
      expect(marker.y).toBeLessThanOrEqual(420);
    }
  });
});

describe("timeline", () => {
  it("lists the snapshot newest first, including unlocated events", () => {
    const collection = fiveFeatureCollection();
    collection.unlocated = [
      {
        tweet_id: "u1",
        classes: ["Weather"],
        time: "2016-02-03T12:05:00Z",
        text: "storm rolling in",
      },
    ];
    const entries = timelineFromSnapshot(loadedState(collection));
    expect(entries.map((e) => e.tweet_id)).toEqual([
      "u1",
      "f1",
      "f2",
      "f3",
      "f4",
      "f5",
    ]);
  });
});
