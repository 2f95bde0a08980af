import { Api } from "./api";
import { mountApp } from "./app";

// Same-origin by default; ?api=http://host:port targets a remote service.
const base = new URLSearchParams(window.location.search).get("api") ?? "";
const root = document.getElementById("root");
if (root) mountApp(root, new Api(base));
