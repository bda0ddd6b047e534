import type { EventCollection, EventFeature, EventProperties } from "./types.js";

// The service rejects windows outside (0, 60] minutes.
export const MIN_WINDOW_MINUTES = 1;
export const MAX_WINDOW_MINUTES = 60;

export interface MapViewState {
  minutes: number;
  /** Empty set means every class is shown. */
  classFilter: Set<string>;
  selectedId: string | null;
  snapshot: EventCollection | null;
  /** True when the last poll failed and the snapshot is being kept as-is. */
  stale: boolean;
}

export interface MapBounds {
  west: number;
  south: number;
  east: number;
  north: number;
}

export interface Marker {
  id: string;
  x: number;
  y: number;
  labels: string[];
  feature: EventFeature;
}

export function createViewState(): MapViewState {
  return {
    minutes: MAX_WINDOW_MINUTES,
    classFilter: new Set(),
    selectedId: null,
    snapshot: null,
    stale: false,
  };
}

export function clampMinutes(minutes: number): number {
  if (!Number.isFinite(minutes)) return MAX_WINDOW_MINUTES;
  const whole = Math.round(minutes);
  return Math.min(Math.max(whole, MIN_WINDOW_MINUTES), MAX_WINDOW_MINUTES);
}

export function setMinutes(state: MapViewState, minutes: number): void {
  state.minutes = clampMinutes(minutes);
}

export function toggleClassFilter(state: MapViewState, name: string): void {
  if (state.classFilter.has(name)) state.classFilter.delete(name);
  else state.classFilter.add(name);
}

export function applyEvents(state: MapViewState, collection: EventCollection): void {
  state.snapshot = collection;
  state.stale = false;
}

/** A failed poll keeps the last snapshot on screen, flagged as stale. */
export function applyFetchFailure(state: MapViewState): void {
  state.stale = true;
}

/** The class labels a marker would render under the active filter. */
export function markerLabels(feature: EventFeature, filter: Set<string>): string[] {
  const classes = feature.properties.classes;
  return filter.size === 0 ? [...classes] : classes.filter((c) => filter.has(c));
}

export function visibleFeatures(state: MapViewState): EventFeature[] {
  if (state.snapshot === null) return [];
  return state.snapshot.features.filter(
    (f) => markerLabels(f, state.classFilter).length > 0,
  );
}

/**
 * Class counts for the histogram panel. Tallied from the same labels the
 * markers render, so bar totals always equal the marker label counts.
 */
export function histogramCounts(state: MapViewState): Map<string, number> {
  const counts = new Map<string, number>();
  for (const feature of visibleFeatures(state)) {
    for (const name of markerLabels(feature, state.classFilter)) {
      counts.set(name, (counts.get(name) ?? 0) + 1);
    }
  }
  return counts;
}

export function boundsFromFeatures(features: EventFeature[]): MapBounds {
  if (features.length === 0) {
    return { west: -180, south: -90, east: 180, north: 90 };
  }
  let west = Infinity;
  let south = Infinity;
  let east = -Infinity;
  let north = -Infinity;
  for (const f of features) {
    const [lon, lat] = f.geometry.coordinates;
    west = Math.min(west, lon);
    south = Math.min(south, lat);
    east = Math.max(east, lon);
    north = Math.max(north, lat);
  }
  // Pad so single points and thin clusters do not sit on the frame edge.
  const padLon = Math.max((east - west) * 0.1, 0.005);
  const padLat = Math.max((north - south) * 0.1, 0.005);
  return {
    west: west - padLon,
    south: south - padLat,
    east: east + padLon,
    north: north + padLat,
  };
}

export function project(
  lon: number,
  lat: number,
  bounds: MapBounds,
  width: number,
  height: number,
): { x: number; y: number } {
  const x = ((lon - bounds.west) / (bounds.east - bounds.west)) * width;
  const y = ((bounds.north - lat) / (bounds.north - bounds.south)) * height;
  return { x, y };
}

export function markers(
  state: MapViewState,
  width: number,
  height: number,
): Marker[] {
  const features = visibleFeatures(state);
  const bounds = boundsFromFeatures(features);
  return features.map((feature) => {
    const [lon, lat] = feature.geometry.coordinates;
    const { x, y } = project(lon, lat, bounds, width, height);
    return {
      id: feature.properties.tweet_id,
      x,
      y,
      labels: markerLabels(feature, state.classFilter),
      feature,
    };
  });
}

export function selectFeature(state: MapViewState, id: string | null): void {
  state.selectedId = id;
}

export function selectedFeature(state: MapViewState): EventFeature | null {
  if (state.selectedId === null || state.snapshot === null) return null;
  return (
    state.snapshot.features.find(
      (f) => f.properties.tweet_id === state.selectedId,
    ) ?? null
  );
}

export interface PopupContent {
  text: string;
  time: string;
  impact: string;
}

/** Dialogue box for a clicked marker. Text arrives masked from the service. */
export function popupContent(feature: EventFeature): PopupContent {
  const props = feature.properties;
  return {
    text: props.text,
    time: props.time,
    impact: props.impact === undefined ? "unscored" : `impact ${props.impact.toFixed(2)}`,
  };
}

/** Timeline entries from the same snapshot the map renders, newest first. */
export function timelineFromSnapshot(state: MapViewState): EventProperties[] {
  if (state.snapshot === null) return [];
  const entries = [
    ...state.snapshot.features.map((f) => f.properties),
    ...state.snapshot.unlocated,
  ];
  return entries.sort((a, b) => Date.parse(b.time) - Date.parse(a.time));
}
