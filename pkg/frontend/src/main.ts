import { ApiClient } from "./api";
import { mountApp } from "./app";

// The service normally sits behind the same origin; a ?api=http://host:port
// query parameter points the UI at a service running elsewhere.
const base = new URLSearchParams(window.location.search).get("api") ?? "";

const root = document.querySelector("#app");
if (!(root instanceof HTMLElement)) throw new Error("missing #app container");
mountApp(root, new ApiClient(base));
