// Client for the search service's JSON API. The payload deliberately says
// nothing about which results were recommended; the client neither knows
// nor cares.

export interface SerpResult {
  rank: number;
  url: string;
  title: string;
  snippet: string;
  click_token: string;
}

export interface SerpPayload {
  query: string;
  page: number;
  results: SerpResult[];
}

export const PAGE_SIZE = 10;

export async function fetchSerp(
  query: string,
  page: number,
  base = "",
): Promise<SerpPayload> {
  const params = new URLSearchParams({ q: query, p: String(page) });
  const response = await fetch(`${base}/search?${params.toString()}`);
  if (!response.ok) {
    throw new Error(`search failed with HTTP ${response.status}`);
  }
  return (await response.json()) as SerpPayload;
}

// Every result navigation goes through the click endpoint so the visit is
// logged and reinforced; the service then redirects to the destination.
export function clickHref(result: SerpResult, base = ""): string {
  return `${base}/click?t=${encodeURIComponent(result.click_token)}`;
}

export function searchHref(query: string, page: number): string {
  const params = new URLSearchParams({ q: query, p: String(page) });
  return `/?${params.toString()}`;
}
