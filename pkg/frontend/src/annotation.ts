import { ApiError } from "./api.js";
import { OTHER } from "./types.js";
import type { AnnotationPayload, FieldError, TweetDraft } from "./types.js";

// Shown next to the class checkboxes; these are the labelling criteria
// annotators are asked to apply.
export const ANNOTATION_HINTS = [
  "Assign the tweet to one or more event classes.",
  "Use Other, on its own, when the text is too hard to understand.",
];

export interface AnnotationSession {
  queue: TweetDraft[];
  /** Tweets before this index have left the queue (submitted or skipped). */
  index: number;
  submitted: number;
  reviewer: string;
  selected: Set<string>;
  errors: FieldError[];
  /** Payloads accepted locally while the service was unreachable. */
  pending: AnnotationPayload[];
}

export type SubmitOutcome = "submitted" | "blocked" | "rejected" | "queued";

export type PostAnnotation = (payload: AnnotationPayload) => Promise<unknown>;

export function createSession(
  tweets: TweetDraft[],
  reviewer = "",
): AnnotationSession {
  return {
    queue: [...tweets],
    index: 0,
    submitted: 0,
    reviewer,
    selected: new Set(),
    errors: [],
    pending: [],
  };
}

export function currentTweet(session: AnnotationSession): TweetDraft | null {
  return session.index < session.queue.length
    ? session.queue[session.index]
    : null;
}

export function remaining(session: AnnotationSession): number {
  return session.queue.length - session.index;
}

/**
 * Toggle a label on the current tweet. "Other" never coexists with an event
 * class: selecting it clears the rest, and selecting any class evicts it.
 */
export function toggleLabel(session: AnnotationSession, label: string): void {
  if (session.selected.has(label)) {
    session.selected.delete(label);
    return;
  }
  if (label === OTHER) {
    session.selected.clear();
  } else {
    session.selected.delete(OTHER);
  }
  session.selected.add(label);
}

/** Why submit is currently blocked, or null when it may proceed. */
export function submitBlockReason(session: AnnotationSession): string | null {
  if (currentTweet(session) === null) return "nothing left to annotate";
  if (session.selected.size === 0) {
    return "select at least one event class, or Other";
  }
  return null;
}

export function buildPayload(session: AnnotationSession): AnnotationPayload {
  const tweet = currentTweet(session);
  if (tweet === null) throw new Error("no tweet under annotation");
  return { ...tweet, labels: [...session.selected].sort() };
}

function advance(session: AnnotationSession): void {
  session.index += 1;
  session.selected.clear();
  session.errors = [];
}

/** Move past the current tweet without labelling it. */
export function skip(session: AnnotationSession): void {
  if (currentTweet(session) === null) return;
  advance(session);
}

/**
 * Submit the current selection. A service 400 keeps the tweet in place with
 * its field errors shown inline; an unreachable service queues the payload
 * locally for retry and moves on.
 */
export async function submitCurrent(
  session: AnnotationSession,
  post: PostAnnotation,
): Promise<SubmitOutcome> {
  const reason = submitBlockReason(session);
  if (reason !== null) {
    session.errors = [{ field: "labels", message: reason }];
    return "blocked";
  }
  const payload = buildPayload(session);
  try {
    await post(payload);
  } catch (err) {
    if (err instanceof ApiError) {
      session.errors = err.errors;
      return "rejected";
    }
    session.pending.push(payload);
    advance(session);
    return "queued";
  }
  session.submitted += 1;
  advance(session);
  return "submitted";
}

/**
 * Flush the offline queue in order. Stops at the first unreachable-service
 * failure; a payload the service rejects is dropped with its errors surfaced
 * so one bad entry cannot wedge the queue. Returns how many were accepted.
 */
export async function retryPending(
  session: AnnotationSession,
  post: PostAnnotation,
): Promise<number> {
  let accepted = 0;
  while (session.pending.length > 0) {
    const payload = session.pending[0];
    try {
      await post(payload);
    } catch (err) {
      if (err instanceof ApiError) {
        session.errors = err.errors;
        session.pending.shift();
        continue;
      }
      break;
    }
    session.pending.shift();
    session.submitted += 1;
    accepted += 1;
  }
  return accepted;
}
