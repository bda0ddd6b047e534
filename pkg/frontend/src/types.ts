// Types mirroring the urbanpulse HTTP contract. The service is the source of
// truth; nothing here adds fields the endpoints do not serve.

export const EVENT_CLASSES = [
  "Crime",
  "Cultural",
  "Food",
  "Social",
  "Sport",
  "Weather",
  "Transportation",
] as const;

export type EventClassName = (typeof EVENT_CLASSES)[number];

// "Other" is a valid label but never combines with an event class.
export const OTHER = "Other";

export interface EventProperties {
  tweet_id: string;
  classes: string[];
  time: string;
  text: string;
  impact?: number;
  severity?: number;
  likelihood?: number;
}

export interface EventFeature {
  type: "Feature";
  geometry: { type: "Point"; coordinates: [number, number] };
  properties: EventProperties;
}

export interface EventCollection {
  type: "FeatureCollection";
  features: EventFeature[];
  unlocated: EventProperties[];
}

export interface HistogramResponse {
  date: string;
  counts: Record<string, number>;
}

export interface TimelineResponse {
  annotations: EventProperties[];
}

export interface HealthResponse {
  status: string;
  window_annotations: number;
}

export interface FieldError {
  field: string;
  message: string;
}

export interface TweetDraft {
  id: string;
  text: string;
  created_at: string;
  lat?: number;
  lon?: number;
}

export interface AnnotationPayload extends TweetDraft {
  labels: string[];
}
