/** Result-list rendering: hits appear exactly in API order, text highlights
 * wrapped in <mark>, math highlights re-parsed into live MathML with an
 * emphasized border. */

import type { SearchHit, SearchResponse } from "./api.js";

const encoder = new TextEncoder();
const decoder = new TextDecoder();

/** Slice snippet text by the byte offsets the API reports. */
function sliceBytes(bytes: Uint8Array, start: number, end: number): string {
  return decoder.decode(bytes.subarray(start, end));
}

function renderSnippet(doc: Document, hit: SearchHit): HTMLElement {
  const container = doc.createElement("p");
  container.className = "snippet";
  const bytes = encoder.encode(hit.snippet);
  const spans = [...hit.highlights].sort((a, b) => a.start - b.start);
  let cursor = 0;
  for (const span of spans) {
    const start = Math.max(span.start, cursor);
    if (start >= span.end) continue;
    if (start > cursor) {
      container.appendChild(doc.createTextNode(sliceBytes(bytes, cursor, start)));
    }
    const piece = sliceBytes(bytes, start, span.end);
    if (span.kind === "math") {
      container.appendChild(renderMathHighlight(doc, piece));
    } else {
      const mark = doc.createElement("mark");
      mark.className = "hl-text";
      mark.textContent = piece;
      container.appendChild(mark);
    }
    cursor = span.end;
  }
  if (cursor < bytes.length) {
    container.appendChild(doc.createTextNode(sliceBytes(bytes, cursor, bytes.length)));
  }
  return container;
}

/** A math hit is the whole <math> island; render it as real MathML when it
 * parses (snippet windows may clip an island, in which case fall back to a
 * plain mark). */
function renderMathHighlight(doc: Document, markup: string): HTMLElement {
  const wrapper = doc.createElement("span");
  wrapper.className = "hl-math";
  const parsed = new DOMParser().parseFromString(markup, "application/xml");
  const root = parsed.documentElement;
  if (root.localName === "math" && parsed.querySelector("parsererror") === null) {
    wrapper.appendChild(doc.importNode(root, true));
  } else {
    const mark = doc.createElement("mark");
    mark.className = "hl-text";
    mark.textContent = markup;
    wrapper.appendChild(mark);
  }
  return wrapper;
}

export function renderResults(doc: Document, list: HTMLElement, response: SearchResponse): void {
  list.replaceChildren();
  for (const hit of response.results) {
    const item = doc.createElement("li");
    item.className = "result";
    item.dataset.docId = String(hit.doc_id);

    const heading = doc.createElement("h3");
    heading.className = "result-title";
    heading.textContent = hit.title || hit.path;
    const score = doc.createElement("span");
    score.className = "result-score";
    score.textContent = hit.score.toFixed(4);
    const path = doc.createElement("span");
    path.className = "result-path";
    path.textContent = hit.path;

    item.appendChild(heading);
    item.appendChild(score);
    item.appendChild(path);
    item.appendChild(renderSnippet(doc, hit));
    list.appendChild(item);
  }
}

export interface PagerView {
  label: string;
  hasPrev: boolean;
  hasNext: boolean;
  pages: number;
}

export function pagerView(totalHits: number, page: number, pageSize: number): PagerView {
  const pages = Math.max(1, Math.ceil(totalHits / pageSize));
  return {
    label: `page ${Math.min(page, pages - 1) + 1} of ${pages}`,
    hasPrev: page > 0,
    hasNext: page + 1 < pages,
    pages,
  };
}
