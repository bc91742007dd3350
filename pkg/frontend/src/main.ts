// App entry: a tiny hash router. Share links carry a form token in the path
// (#/f/<token>); staff routes read the server URL and bearer token saved on
// the connect screen.

import { ApiClient } from "./api.js";
import { clear, el } from "./dom.js";
import { FormPage } from "./formPage.js";
import { GridPage } from "./gridPage.js";

const SERVER_KEY = "fieldbook-server";
const BEARER_KEY = "fieldbook-bearer";

function settings(): { server: string; bearer: string } {
  return {
    server: localStorage.getItem(SERVER_KEY) ?? "",
    bearer: localStorage.getItem(BEARER_KEY) ?? "",
  };
}

function renderConnect(container: HTMLElement): void {
  const current = settings();
  const serverInput = el("input", { type: "text", id: "server-url", placeholder: "http://127.0.0.1:8675" });
  serverInput.value = current.server;
  const bearerInput = el("input", { type: "password", id: "bearer-token", placeholder: "bearer token" });
  bearerInput.value = current.bearer;
  clear(container);
  container.append(
    el("h1", {}, "Fieldbook"),
    el("p", {}, "Open a shared form link (#/f/<token>), or connect with a server URL and bearer token to browse a grid (#/grid/<base>/<table>)."),
    el("label", { for: "server-url" }, "Server URL"),
    serverInput,
    el("label", { for: "bearer-token" }, "Bearer token"),
    bearerInput,
    el("button", {
      type: "button",
      onclick: () => {
        localStorage.setItem(SERVER_KEY, serverInput.value.trim());
        localStorage.setItem(BEARER_KEY, bearerInput.value.trim());
        renderConnect(container);
      },
    }, "Save"),
  );
}

export function route(container: HTMLElement, hash: string): void {
  const parts = hash.replace(/^#\/?/, "").split("/").filter(Boolean);
  const { server, bearer } = settings();
  if (parts[0] === "f" && parts[1]) {
    const page = new FormPage(container, new ApiClient(server), { token: parts[1] });
    void page.load();
    return;
  }
  if (parts[0] === "form" && parts[1]) {
    const page = new FormPage(container, new ApiClient(server, bearer), { formId: parts[1] });
    void page.load();
    return;
  }
  if (parts[0] === "grid" && parts[1] && parts[2]) {
    const page = new GridPage(container, new ApiClient(server, bearer), parts[1], decodeURIComponent(parts[2]));
    void page.load();
    return;
  }
  renderConnect(container);
}

export function start(): void {
  const container = document.getElementById("app");
  if (!container) return;
  const rerender = () => route(container, location.hash);
  window.addEventListener("hashchange", rerender);
  rerender();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start();
}
