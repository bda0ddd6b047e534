import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { startPolling } from "../src/poll.js";

describe("startPolling", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  it("runs the task immediately and then on the cadence", async () => {
    let runs = 0;
    const poller = startPolling(async () => {
      runs += 1;
    }, 1000);
    await vi.advanceTimersByTimeAsync(0);
    expect(runs).toBe(1);
    await vi.advanceTimersByTimeAsync(3000);
    expect(runs).toBe(4);
    poller.stop();
  });

  it("keeps at most one poll in flight", async () => {
    let active = 0;
    let peak = 0;
    let runs = 0;
    const poller = startPolling(async () => {
      runs += 1;
      active += 1;
      peak = Math.max(peak, active);
      // Slower than the interval: the 1 s and 2 s ticks must be dropped.
      await new Promise((resolve) => setTimeout(resolve, 2500));
      active -= 1;
    }, 1000);
    await vi.advanceTimersByTimeAsync(10_000);
    poller.stop();
    expect(peak).toBe(1);
    expect(runs).toBeGreaterThanOrEqual(3);
    expect(runs).toBeLessThan(10);
  });

  it("stop halts the cadence", async () => {
    let runs = 0;
    const poller = startPolling(async () => {
      runs += 1;
    }, 1000);
    await vi.advanceTimersByTimeAsync(0);
    poller.stop();
    await vi.advanceTimersByTimeAsync(5000);
    expect(runs).toBe(1);
  });

  it("a failing task does not jam the next tick", async () => {
    let runs = 0;
    const poller = startPolling(async () => {
      runs += 1;
      throw new Error("boom");
    }, 1000);
    await vi.advanceTimersByTimeAsync(0).catch(() => undefined);
    await vi.advanceTimersByTimeAsync(2000).catch(() => undefined);
    poller.stop();
    expect(runs).toBeGreaterThanOrEqual(2);
  });
});
