import { Client } from "./api.js";
import { mountApp } from "./app.js";

// Same-origin by default; override with ?api=http://host:port when the
// bundle is served from a different static host.
const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("api") ?? "";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app container");
mountApp(root, new Client(baseUrl));
