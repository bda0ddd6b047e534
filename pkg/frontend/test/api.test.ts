import http from "node:http";
import type { AddressInfo } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, Client } from "../src/api.js";

const COLLECTION = {
  type: "FeatureCollection",
  features: [
    {
      type: "Feature",
      geometry: { type: "Point", coordinates: [-0.128, 51.508] },
      properties: {
        tweet_id: "e1",
        classes: ["Crime"],
        time: "2016-02-03T12:00:00Z",
        text: "incident reported",
      },
    },
  ],
  unlocated: [],
};

let server: http.Server;
let client: Client;
let lastRequest: { method?: string; url?: string; body?: string } = {};

beforeAll(async () => {
  server = http.createServer((req, res) => {
    let body = "";
    req.on("data", (chunk) => (body += chunk));
    req.on("end", () => {
      lastRequest = { method: req.method, url: req.url, body };
      const url = new URL(req.url ?? "/", "http://localhost");
      if (url.pathname === "/health") {
        res.setHeader("content-type", "application/json");
        res.end(JSON.stringify({ status: "ok", window_annotations: 1 }));
      } else if (url.pathname === "/events") {
        const minutes = Number(url.searchParams.get("minutes") ?? "60");
        if (!(minutes > 0 && minutes <= 60)) {
          res.statusCode = 400;
          res.setHeader("content-type", "application/json");
          res.end(JSON.stringify({
            detail: [{ field: "query.minutes", message: "out of range" }],
          }));
          return;
        }
        res.setHeader("content-type", "application/geo+json");
        res.end(JSON.stringify(COLLECTION));
      } else if (url.pathname === "/histogram") {
        if (url.searchParams.get("date") === "boom") {
          res.statusCode = 500;
          res.end("not json at all");
          return;
        }
        res.setHeader("content-type", "application/json");
        res.end(JSON.stringify({ date: "2016-02-03", counts: { Crime: 1 } }));
      } else if (url.pathname === "/timeline") {
        res.setHeader("content-type", "application/json");
        res.end(JSON.stringify({ annotations: [COLLECTION.features[0].properties] }));
      } else if (url.pathname === "/annotations" && req.method === "POST") {
        const parsed = JSON.parse(body);
        if (parsed.labels.includes("Martian")) {
          res.statusCode = 400;
          res.setHeader("content-type", "application/json");
          res.end(JSON.stringify({
            detail: [{ field: "annotation", message: "bad labels" }],
          }));
          return;
        }
        res.statusCode = 201;
        res.setHeader("content-type", "application/json");
        res.end(body);
      } else {
        res.statusCode = 404;
        res.end(JSON.stringify({ detail: [] }));
      }
    });
  });
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const { port } = server.address() as AddressInfo;
  client = new Client(`http://127.0.0.1:${port}`);
});

afterAll(async () => {
  await new Promise((resolve) => server.close(resolve));
});

describe("Client", () => {
  it("fetches health", async () => {
    expect(await client.health()).toEqual({ status: "ok", window_annotations: 1 });
  });

  it("fetches the event window with the minutes query", async () => {
    const collection = await client.events(15);
    expect(collection.features[0].properties.tweet_id).toBe("e1");
    expect(lastRequest.url).toBe("/events?minutes=15");
  });

  it("omits the query when no window is given", async () => {
    await client.events();
    expect(lastRequest.url).toBe("/events");
  });

  it("maps a 400 detail body onto ApiError fields", async () => {
    const err = await client.events(61).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(400);
    expect((err as ApiError).errors).toEqual([
      { field: "query.minutes", message: "out of range" },
    ]);
    expect((err as ApiError).message).toContain("query.minutes");
  });

  it("fetches histogram and timeline", async () => {
    expect((await client.histogram("2016-02-03")).counts).toEqual({ Crime: 1 });
    expect(lastRequest.url).toBe("/histogram?date=2016-02-03");
    expect((await client.timeline(5)).annotations).toHaveLength(1);
    expect(lastRequest.url).toBe("/timeline?limit=5");
  });

  it("POSTs annotations as JSON and returns the stored record", async () => {
    const payload = {
      id: "a1",
      text: "goal at the stadium",
      created_at: "2016-02-03T12:00:00Z",
      labels: ["Sport"],
    };
    expect(await client.submitAnnotation(payload)).toEqual(payload);
    expect(lastRequest.method).toBe("POST");
    expect(JSON.parse(lastRequest.body ?? "")).toEqual(payload);
  });

  it("surfaces annotation rejections with their field", async () => {
    const err = await client
      .submitAnnotation({
        id: "a2",
        text: "???",
        created_at: "2016-02-03T12:00:00Z",
        labels: ["Martian"],
      })
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).errors[0].field).toBe("annotation");
  });

  it("degrades to a generic message on non-JSON error bodies", async () => {
    const err = await client.histogram("boom").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(500);
    expect((err as ApiError).message).toBe("HTTP 500");
  });

  it("rejects with a plain error when the service is unreachable", async () => {
    const dead = new Client("http://127.0.0.1:1");
    const err = await dead.health().catch((e: unknown) => e);
    expect(err).not.toBeInstanceOf(ApiError);
    expect(err).toBeInstanceOf(Error);
  });
});
