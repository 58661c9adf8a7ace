// Entry point. All state lives in the URL (?q=&p=), so the page is
// reload-safe and the browser history records every query.

import { fetchSerp } from "./api.js";
import { renderError, renderHome, renderSerp } from "./serp.js";

function mountPoint(): HTMLElement {
  const existing = document.getElementById("app");
  if (existing) {
    return existing;
  }
  const created = document.createElement("main");
  created.id = "app";
  document.body.appendChild(created);
  return created;
}

export async function boot(): Promise<void> {
  const mount = mountPoint();
  const params = new URLSearchParams(window.location.search);
  const query = (params.get("q") ?? "").trim();
  const page = Math.max(1, Number(params.get("p") ?? "1") || 1);

  mount.replaceChildren();
  if (!query) {
    mount.appendChild(renderHome());
    return;
  }
  document.title = `${query} - search`;
  try {
    const payload = await fetchSerp(query, page);
    mount.appendChild(renderSerp(payload));
  } catch (error) {
    const message = error instanceof Error ? error.message : String(error);
    mount.appendChild(renderError(`Search is unavailable (${message}).`,
                                  window.location.href));
  }
}

boot();
