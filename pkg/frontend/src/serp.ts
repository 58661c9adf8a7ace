// Pure rendering: payload in, DOM out. Every result entry uses the exact
// same markup, so nothing in the page can hint at how a result was chosen.

import { PAGE_SIZE, SerpPayload, SerpResult, clickHref, searchHref } from "./api.js";

export function renderResult(result: SerpResult): HTMLElement {
  const item = document.createElement("li");
  item.className = "result";

  const title = document.createElement("a");
  title.className = "result-title";
  title.href = clickHref(result);
  title.textContent = result.title;
  item.appendChild(title);

  const url = document.createElement("cite");
  url.className = "result-url";
  url.textContent = result.url;
  item.appendChild(url);

  const snippet = document.createElement("p");
  snippet.className = "result-snippet";
  snippet.textContent = result.snippet;
  item.appendChild(snippet);

  return item;
}

export function renderSearchForm(query: string): HTMLElement {
  const form = document.createElement("form");
  form.className = "search-form";
  form.method = "get";
  form.action = "/";

  const box = document.createElement("input");
  box.type = "search";
  box.name = "q";
  box.className = "query-box";
  box.value = query;
  box.required = true;  // blank submits stay inert, no request leaves the page
  box.setAttribute("autocomplete", "off");
  form.appendChild(box);

  const page = document.createElement("input");
  page.type = "hidden";
  page.name = "p";
  page.value = "1";
  form.appendChild(page);

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "Search";
  form.appendChild(submit);

  return form;
}

function pagerLink(label: string, query: string, page: number): HTMLElement {
  const link = document.createElement("a");
  link.className = "pager-link";
  link.href = searchHref(query, page);
  link.textContent = label;
  return link;
}

export function renderSerp(payload: SerpPayload): HTMLElement {
  const container = document.createElement("section");
  container.className = "serp";
  container.appendChild(renderSearchForm(payload.query));

  if (payload.results.length === 0) {
    const empty = document.createElement("p");
    empty.className = "no-results";
    empty.textContent = `No results for "${payload.query}".`;
    container.appendChild(empty);
  } else {
    const list = document.createElement("ol");
    list.className = "results";
    list.start = (payload.page - 1) * PAGE_SIZE + 1;
    for (const result of payload.results) {
      list.appendChild(renderResult(result));
    }
    container.appendChild(list);
  }

  const pager = document.createElement("nav");
  pager.className = "pager";
  if (payload.page > 1) {
    pager.appendChild(pagerLink("Previous", payload.query, payload.page - 1));
  }
  // a full page suggests there may be more; page fetches stay server-side
  // so deeper views are logged too
  if (payload.results.length === PAGE_SIZE) {
    pager.appendChild(pagerLink("Next", payload.query, payload.page + 1));
  }
  container.appendChild(pager);

  return container;
}

export function renderError(message: string, retryHref: string): HTMLElement {
  const banner = document.createElement("div");
  banner.className = "banner error";
  banner.setAttribute("role", "alert");

  const text = document.createElement("span");
  text.textContent = message;
  banner.appendChild(text);

  const retry = document.createElement("a");
  retry.className = "retry-link";
  retry.href = retryHref;
  retry.textContent = "Retry";
  banner.appendChild(retry);

  return banner;
}

export function renderHome(): HTMLElement {
  const container = document.createElement("section");
  container.className = "serp home";
  container.appendChild(renderSearchForm(""));
  return container;
}
