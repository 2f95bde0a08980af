// Shared fixtures and a fetch stub for the contract tests. Responses are
// plain objects with the minimal surface the client reads.

import type { ExampleDto, FetchFn, FetchResponse } from "../src/api";

export function jsonResponse(status: number, body: unknown): FetchResponse {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: async () => body,
  };
}

export interface RecordedCall {
  url: string;
  init?: RequestInit;
}

export type RouteHandler = (
  url: string,
  init?: RequestInit,
) => FetchResponse | Promise<FetchResponse>;

export function stubFetch(handler: RouteHandler): {
  fetchFn: FetchFn;
  calls: RecordedCall[];
} {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchFn = async (url, init) => {
    calls.push({ url, init });
    return handler(url, init);
  };
  return { fetchFn, calls };
}

function cell(text: string, link?: string) {
  return { text, links: link ? [link] : [], images: [] };
}

export const fixtureExample: ExampleDto = {
  id: "demo-dev-0",
  dataset: "demo",
  category: "Encyclopedia",
  question: "How old is Alice?",
  table: {
    id: "demo-dev-0-t",
    header_rows: 1,
    caption: "people",
    cells: [
      [cell("Name"), cell("Age"), cell("City")],
      [cell("Alice", "https://example.org/alice"), cell("34"), cell("Oslo")],
      [cell("Bob"), cell("28"), cell("Lima")],
    ],
    merged_regions: [],
  },
  passages: [{ id: "p1", title: "About", text: "Alice lives in Oslo." }],
  images: [],
  answer: { format: "SpanText", value: "34", derivation: null },
};

export function mountPoint(): HTMLElement {
  document.body.innerHTML = '<div id="root"></div>';
  return document.getElementById("root") as HTMLElement;
}
