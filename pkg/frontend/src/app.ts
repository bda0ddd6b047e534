import { Client } from "./api.js";
import {
  ANNOTATION_HINTS,
  createSession,
  currentTweet,
  remaining,
  retryPending,
  skip,
  submitCurrent,
  toggleLabel,
} from "./annotation.js";
import type { AnnotationSession } from "./annotation.js";
import { startPolling } from "./poll.js";
import { EVENT_CLASSES, OTHER } from "./types.js";
import type { TweetDraft } from "./types.js";
import {
  applyEvents,
  applyFetchFailure,
  clampMinutes,
  createViewState,
  histogramCounts,
  markers,
  popupContent,
  selectFeature,
  selectedFeature,
  setMinutes,
  timelineFromSnapshot,
  toggleClassFilter,
} from "./view.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const MAP_W = 640;
const MAP_H = 420;
const POLL_MS = 15_000;

const CLASS_COLORS: Record<string, string> = {
  Crime: "#d33",
  Cultural: "#a5d",
  Food: "#e82",
  Social: "#37b",
  Sport: "#2a5",
  Weather: "#19c",
  Transportation: "#875",
};

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function mountApp(root: HTMLElement, client: Client): { stop(): void } {
  const doc = root.ownerDocument;
  const state = createViewState();
  let session: AnnotationSession = createSession([]);

  root.innerHTML = "";
  const banner = el(doc, "div", "up-banner");
  banner.hidden = true;
  const controls = el(doc, "div", "up-controls");
  const mapHost = el(doc, "div", "up-map");
  const popup = el(doc, "div", "up-popup");
  popup.hidden = true;
  const histogramHost = el(doc, "div", "up-histogram");
  const timelineHost = el(doc, "ul", "up-timeline");
  const annotateHost = el(doc, "div", "up-annotate");

  const viewPane = el(doc, "div", "up-view-pane");
  viewPane.append(banner, controls, mapHost, popup, histogramHost, timelineHost);
  root.append(viewPane, annotateHost);

  // Window-size input plus one filter checkbox per class.
  const minutesInput = el(doc, "input");
  minutesInput.type = "number";
  minutesInput.min = "1";
  minutesInput.max = "60";
  minutesInput.value = String(state.minutes);
  minutesInput.addEventListener("change", () => {
    setMinutes(state, Number(minutesInput.value));
    minutesInput.value = String(state.minutes);
    void poller.tick();
  });
  const minutesLabel = el(doc, "label", "up-minutes", "window (min) ");
  minutesLabel.appendChild(minutesInput);
  controls.appendChild(minutesLabel);

  for (const name of EVENT_CLASSES) {
    const box = el(doc, "input");
    box.type = "checkbox";
    box.addEventListener("change", () => {
      toggleClassFilter(state, name);
      renderView();
    });
    const label = el(doc, "label", "up-filter");
    label.append(box, doc.createTextNode(name));
    controls.appendChild(label);
  }

  function renderMap(): void {
    mapHost.innerHTML = "";
    const svg = doc.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${MAP_W} ${MAP_H}`);
    svg.setAttribute("class", "up-map-svg");
    for (const marker of markers(state, MAP_W, MAP_H)) {
      const dot = doc.createElementNS(SVG_NS, "circle");
      dot.setAttribute("cx", marker.x.toFixed(1));
      dot.setAttribute("cy", marker.y.toFixed(1));
      dot.setAttribute("r", "5");
      dot.setAttribute("fill", CLASS_COLORS[marker.labels[0]] ?? "#888");
      dot.addEventListener("click", () => {
        selectFeature(state, marker.id);
        renderPopup();
      });
      const tooltip = doc.createElementNS(SVG_NS, "title");
      tooltip.textContent = marker.labels.join(", ");
      dot.appendChild(tooltip);
      svg.appendChild(dot);
    }
    mapHost.appendChild(svg);
  }

  function renderPopup(): void {
    const feature = selectedFeature(state);
    if (feature === null) {
      popup.hidden = true;
      return;
    }
    const content = popupContent(feature);
    popup.innerHTML = "";
    popup.append(
      el(doc, "p", "up-popup-text", content.text),
      el(doc, "p", "up-popup-meta", `${content.time} · ${content.impact}`),
    );
    popup.hidden = false;
  }

  function renderHistogram(): void {
    histogramHost.innerHTML = "";
    const counts = histogramCounts(state);
    const top = Math.max(1, ...counts.values());
    for (const [name, count] of [...counts.entries()].sort()) {
      const row = el(doc, "div", "up-bar-row");
      const bar = el(doc, "div", "up-bar");
      bar.style.width = `${(count / top) * 100}%`;
      bar.style.background = CLASS_COLORS[name] ?? "#888";
      row.append(el(doc, "span", "up-bar-label", `${name} (${count})`), bar);
      histogramHost.appendChild(row);
    }
  }

  function renderTimeline(): void {
    timelineHost.innerHTML = "";
    for (const entry of timelineFromSnapshot(state).slice(0, 50)) {
      const item = el(doc, "li", "up-timeline-item");
      item.append(
        el(doc, "span", "up-time", entry.time),
        doc.createTextNode(" "),
        el(doc, "span", "up-text", entry.text),
      );
      timelineHost.appendChild(item);
    }
  }

  function renderView(): void {
    banner.hidden = !state.stale;
    banner.textContent = state.stale
      ? "service unreachable; showing the last snapshot"
      : "";
    renderMap();
    renderPopup();
    renderHistogram();
    renderTimeline();
  }

  function renderAnnotator(): void {
    annotateHost.innerHTML = "";
    annotateHost.appendChild(el(doc, "h2", undefined, "Annotate"));
    for (const hint of ANNOTATION_HINTS) {
      annotateHost.appendChild(el(doc, "p", "up-hint", hint));
    }

    const picker = el(doc, "input");
    picker.type = "file";
    picker.accept = ".jsonl,.json,.txt";
    picker.addEventListener("change", () => {
      const file = picker.files?.[0];
      if (!file) return;
      void file.text().then((body) => {
        session = createSession(parseTweetLines(body), session.reviewer);
        renderAnnotator();
      });
    });
    const pickerLabel = el(doc, "label", "up-load", "load tweets ");
    pickerLabel.appendChild(picker);
    annotateHost.appendChild(pickerLabel);

    const tweet = currentTweet(session);
    if (tweet === null) {
      annotateHost.appendChild(
        el(doc, "p", "up-done", `queue empty; ${session.submitted} submitted`),
      );
      return;
    }

    annotateHost.append(
      el(doc, "p", "up-tweet-text", tweet.text),
      el(doc, "p", "up-tweet-meta", tweet.created_at),
      el(doc, "p", "up-progress",
        `${remaining(session)} left · ${session.submitted} submitted` +
          (session.pending.length > 0
            ? ` · ${session.pending.length} queued offline`
            : "")),
    );

    for (const name of [...EVENT_CLASSES, OTHER]) {
      const box = el(doc, "input");
      box.type = "checkbox";
      box.checked = session.selected.has(name);
      box.addEventListener("change", () => {
        toggleLabel(session, name);
        renderAnnotator();
      });
      const label = el(doc, "label", "up-class");
      label.append(box, doc.createTextNode(name));
      annotateHost.appendChild(label);
    }

    for (const err of session.errors) {
      annotateHost.appendChild(
        el(doc, "p", "up-error",
          err.field ? `${err.field}: ${err.message}` : err.message),
      );
    }

    const submit = el(doc, "button", "up-submit", "submit");
    submit.addEventListener("click", () => {
      void submitCurrent(session, (p) => client.submitAnnotation(p)).then(
        renderAnnotator,
      );
    });
    const skipButton = el(doc, "button", "up-skip", "skip");
    skipButton.addEventListener("click", () => {
      skip(session);
      renderAnnotator();
    });
    annotateHost.append(submit, skipButton);
  }

  const poller = startPolling(async () => {
    try {
      const collection = await client.events(state.minutes);
      applyEvents(state, collection);
      if (session.pending.length > 0) {
        await retryPending(session, (p) => client.submitAnnotation(p));
        renderAnnotator();
      }
    } catch {
      applyFetchFailure(state);
    }
    renderView();
  }, POLL_MS);

  renderView();
  renderAnnotator();
  return { stop: () => poller.stop() };
}

/** One tweet per JSON line; blank and malformed lines are skipped. */
export function parseTweetLines(body: string): TweetDraft[] {
  const out: TweetDraft[] = [];
  for (const line of body.split("\n")) {
    if (!line.trim()) continue;
    let record: unknown;
    try {
      record = JSON.parse(line);
    } catch {
      continue;
    }
    const r = record as Partial<TweetDraft>;
    if (typeof r.id !== "string" || typeof r.text !== "string") continue;
    if (typeof r.created_at !== "string") continue;
    const draft: TweetDraft = {
      id: r.id,
      text: r.text,
      created_at: r.created_at,
    };
    if (typeof r.lat === "number" && typeof r.lon === "number") {
      draft.lat = r.lat;
      draft.lon = r.lon;
    }
    out.push(draft);
  }
  return out;
}

export { clampMinutes };
