import { describe, expect, it, vi } from "vitest";

import { ApiError } from "../src/api.js";
import {
  createSession,
  currentTweet,
  remaining,
  retryPending,
  skip,
  submitBlockReason,
  submitCurrent,
  toggleLabel,
} from "../src/annotation.js";
import type { TweetDraft } from "../src/types.js";

function drafts(n: number): TweetDraft[] {
  return Array.from({ length: n }, (_, i) => ({
    id: `t${i}`,
    text: `tweet number ${i}`,
    created_at: "2016-02-03T12:00:00Z",
  }));
}

const accept = vi.fn(async () => ({}));

describe("label exclusivity", () => {
  it("selecting a class after Other deselects Other", () => {
    const session = createSession(drafts(1));
    toggleLabel(session, "Other");
    toggleLabel(session, "Sport");
    expect([...session.selected]).toEqual(["Sport"]);
  });

  it("selecting Other clears every class", () => {
    const session = createSession(drafts(1));
    toggleLabel(session, "Crime");
    toggleLabel(session, "Transportation");
    toggleLabel(session, "Other");
    expect([...session.selected]).toEqual(["Other"]);
  });

  it("toggling twice removes the label", () => {
    const session = createSession(drafts(1));
    toggleLabel(session, "Food");
    toggleLabel(session, "Food");
    expect(session.selected.size).toBe(0);
  });

  it("classes combine freely with each other", () => {
    const session = createSession(drafts(1));
    toggleLabel(session, "Crime");
    toggleLabel(session, "Social");
    expect([...session.selected].sort()).toEqual(["Crime", "Social"]);
  });
});

describe("submit", () => {
  it("is blocked with a message when nothing is selected", async () => {
    const session = createSession(drafts(1));
    const post = vi.fn(accept);
    expect(submitBlockReason(session)).toMatch(/select at least one/);
    expect(await submitCurrent(session, post)).toBe("blocked");
    expect(post).not.toHaveBeenCalled();
    expect(session.errors[0].message).toMatch(/select at least one/);
    expect(session.index).toBe(0);
  });

  it("posts the current tweet with sorted labels and advances", async () => {
    const session = createSession(drafts(2), "rev-1");
    toggleLabel(session, "Sport");
    toggleLabel(session, "Crime");
    const post = vi.fn(accept);
    expect(await submitCurrent(session, post)).toBe("submitted");
    expect(post).toHaveBeenCalledWith({
      id: "t0",
      text: "tweet number 0",
      created_at: "2016-02-03T12:00:00Z",
      labels: ["Crime", "Sport"],
    });
    expect(session.submitted).toBe(1);
    expect(session.index).toBe(1);
    expect(session.selected.size).toBe(0);
  });

  it("a service rejection keeps the tweet in place with inline errors", async () => {
    const session = createSession(drafts(2));
    toggleLabel(session, "Weather");
    const post = vi.fn(async () => {
      throw new ApiError(400, [{ field: "annotation", message: "bad labels" }]);
    });
    expect(await submitCurrent(session, post)).toBe("rejected");
    expect(session.errors).toEqual([
      { field: "annotation", message: "bad labels" },
    ]);
    expect(session.index).toBe(0);
    expect(session.submitted).toBe(0);
    expect(currentTweet(session)?.id).toBe("t0");
  });

  it("an unreachable service queues the payload and moves on", async () => {
    const session = createSession(drafts(2));
    toggleLabel(session, "Food");
    const post = vi.fn(async () => {
      throw new TypeError("fetch failed");
    });
    expect(await submitCurrent(session, post)).toBe("queued");
    expect(session.pending).toHaveLength(1);
    expect(session.pending[0].labels).toEqual(["Food"]);
    expect(session.index).toBe(1);
    expect(session.submitted).toBe(0);
  });
});

describe("queue discipline", () => {
  it("a tweet leaves the queue only via submit or explicit skip", async () => {
    const session = createSession(drafts(3));
    expect(remaining(session)).toBe(3);

    toggleLabel(session, "Other");
    toggleLabel(session, "Other");
    expect(remaining(session)).toBe(3);
    await submitCurrent(session, vi.fn(accept));
    expect(remaining(session)).toBe(3);

    skip(session);
    expect(remaining(session)).toBe(2);

    toggleLabel(session, "Crime");
    await submitCurrent(session, vi.fn(accept));
    expect(remaining(session)).toBe(1);
    expect(session.submitted).toBe(1);
  });

  it("skip past the end is a no-op", () => {
    const session = createSession(drafts(1));
    skip(session);
    skip(session);
    expect(session.index).toBe(1);
    expect(currentTweet(session)).toBeNull();
    expect(submitBlockReason(session)).toMatch(/nothing left/);
  });
});

describe("offline retry queue", () => {
  async function queuedSession(n: number) {
    const session = createSession(drafts(n));
    const offline = vi.fn(async () => {
      throw new TypeError("fetch failed");
    });
    for (let i = 0; i < n; i++) {
      toggleLabel(session, "Social");
      await submitCurrent(session, offline);
    }
    return session;
  }

  it("drains in order once the service is reachable", async () => {
    const session = await queuedSession(3);
    const seen: string[] = [];
    const post = vi.fn(async (p: { id: string }) => {
      seen.push(p.id);
    });
    expect(await retryPending(session, post)).toBe(3);
    expect(seen).toEqual(["t0", "t1", "t2"]);
    expect(session.pending).toHaveLength(0);
    expect(session.submitted).toBe(3);
  });

  it("stops draining when the service drops again", async () => {
    const session = await queuedSession(3);
    let calls = 0;
    const flaky = vi.fn(async () => {
      calls += 1;
      if (calls > 1) throw new TypeError("fetch failed");
    });
    expect(await retryPending(session, flaky)).toBe(1);
    expect(session.pending).toHaveLength(2);
    expect(session.submitted).toBe(1);
  });

  it("a rejected payload is dropped instead of wedging the queue", async () => {
    const session = await queuedSession(2);
    let calls = 0;
    const rejectFirst = vi.fn(async () => {
      calls += 1;
      if (calls === 1) {
        throw new ApiError(400, [{ field: "annotation", message: "stale" }]);
      }
    });
    expect(await retryPending(session, rejectFirst)).toBe(1);
    expect(session.pending).toHaveLength(0);
    expect(session.errors[0].message).toBe("stale");
  });
});
