export interface Poller {
  /** Run one poll now; shared with the interval, so never overlaps. */
  tick(): Promise<void>;
  stop(): void;
}

/**
 * Call `task` immediately and then on a fixed cadence, with at most one call
 * in flight: an interval firing while the previous poll is still awaiting is
 * dropped rather than stacked.
 */
export function startPolling(task: () => Promise<void>, intervalMs: number): Poller {
  let inFlight = false;
  const tick = async (): Promise<void> => {
    if (inFlight) return;
    inFlight = true;
    try {
      await task();
    } catch {
      // A failing poll must not kill the cadence; report inside the task.
    } finally {
      inFlight = false;
    }
  };
  void tick();
  const timer = setInterval(() => {
    void tick();
  }, intervalMs);
  return {
    tick,
    stop: () => clearInterval(timer),
  };
}
