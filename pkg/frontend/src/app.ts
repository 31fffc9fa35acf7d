/** Controller: wires the query form, live preview, results list, pagination,
 * and URL state together.  The displayed order is always the API order; all
 * view state round-trips through the query string. */

import { ApiRequestError, PAGE_SIZE, SearchClient } from "./api.js";
import type { MathFormat, SearchResponse } from "./api.js";
import { previewSegments } from "./latexPreview.js";
import { pagerView, renderResults } from "./render.js";
import { decodeState, encodeState, DEFAULT_STATE } from "./urlState.js";
import type { ViewState } from "./urlState.js";

export interface AppElements {
  form: HTMLFormElement;
  input: HTMLInputElement;
  mode: HTMLSelectElement;
  preview: HTMLElement;
  status: HTMLElement;
  results: HTMLElement;
  pager: HTMLElement;
  prev: HTMLButtonElement;
  next: HTMLButtonElement;
  banner: HTMLElement;
  retry: HTMLButtonElement;
}

export function grabElements(doc: Document): AppElements {
  const get = <T extends HTMLElement>(id: string): T => {
    const el = doc.getElementById(id);
    if (!el) throw new Error(`missing element #${id}`);
    return el as T;
  };
  return {
    form: get<HTMLFormElement>("search-form"),
    input: get<HTMLInputElement>("query-input"),
    mode: get<HTMLSelectElement>("mode-select"),
    preview: get("query-preview"),
    status: get("status-line"),
    results: get<HTMLElement>("results-list"),
    pager: get("pager-label"),
    prev: get<HTMLButtonElement>("page-prev"),
    next: get<HTMLButtonElement>("page-next"),
    banner: get("network-banner"),
    retry: get<HTMLButtonElement>("retry-button"),
  };
}

export class App {
  private state: ViewState = { ...DEFAULT_STATE };
  private lastResponse: SearchResponse | null = null;

  constructor(
    private readonly doc: Document,
    private readonly win: Window,
    private readonly els: AppElements,
    private readonly client: SearchClient,
  ) {}

  init(): void {
    this.els.form.addEventListener("submit", (event) => {
      event.preventDefault();
      this.onSubmit();
    });
    this.els.input.addEventListener("input", () => this.updatePreview());
    this.els.mode.addEventListener("change", () => this.updatePreview());
    this.els.prev.addEventListener("click", () => this.goToPage(this.state.page - 1));
    this.els.next.addEventListener("click", () => this.goToPage(this.state.page + 1));
    this.els.retry.addEventListener("click", () => {
      this.hideBanner();
      void this.runSearch();
    });
    this.win.addEventListener("popstate", () => {
      this.applyState(decodeState(this.win.location.search));
    });
    this.applyState(decodeState(this.win.location.search));
  }

  /** Restore a state (initial load, popstate): fill the form and re-query. */
  private applyState(state: ViewState): void {
    this.state = state;
    this.els.input.value = state.query;
    this.els.mode.value = state.mode;
    this.updatePreview();
    if (state.query.trim()) {
      void this.runSearch();
    } else {
      this.els.results.replaceChildren();
      this.setStatus("");
    }
  }

  private onSubmit(): void {
    const query = this.els.input.value;
    if (!query.trim()) {
      this.setStatus("Enter a query first.", "error");
      return;
    }
    this.state = {
      query,
      mode: this.els.mode.value as MathFormat,
      page: 0,
    };
    this.pushUrl();
    void this.runSearch();
  }

  private goToPage(page: number): void {
    if (page < 0 || !this.state.query.trim()) return;
    this.state = { ...this.state, page };
    this.pushUrl();
    void this.runSearch();
  }

  private pushUrl(): void {
    this.win.history.pushState(null, "", encodeState(this.state) || this.win.location.pathname);
  }

  private async runSearch(): Promise<void> {
    this.setStatus("Searching…");
    try {
      const response = await this.client.search(this.state.query, this.state.mode, this.state.page);
      this.lastResponse = response;
      renderResults(this.doc, this.els.results, response);
      this.renderPager(response);
      if (response.total_hits === 0) {
        this.setStatus("No results.");
      } else {
        this.setStatus(
          `${response.total_hits} hit(s) in ${response.took_ms.toFixed(1)} ms`,
        );
      }
      this.hideBanner();
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") {
        return; // superseded by a newer search
      }
      if (err instanceof ApiRequestError) {
        this.showQueryError(err);
        return;
      }
      this.showBanner();
    }
  }

  /** Inline parse errors point at the offset the service reported. */
  private showQueryError(err: ApiRequestError): void {
    this.els.results.replaceChildren();
    this.renderPager(null);
    if (err.offset !== undefined && err.offset !== null) {
      const caret = " ".repeat(Math.max(0, Math.min(err.offset, this.state.query.length))) + "^";
      this.setStatus(`Query error at offset ${err.offset}: ${err.message}\n${this.state.query}\n${caret}`, "error");
    } else {
      this.setStatus(`Query error: ${err.message}`, "error");
    }
  }

  private updatePreview(): void {
    this.els.preview.replaceChildren();
    if ((this.els.mode.value as MathFormat) !== "latex") return;
    for (const segment of previewSegments(this.els.input.value)) {
      if (segment.kind === "text") {
        this.els.preview.appendChild(this.doc.createTextNode(segment.content));
      } else if (segment.kind === "math") {
        const host = this.doc.createElement("span");
        host.className = "preview-math";
        host.innerHTML = segment.content; // generated by our own converter
        this.els.preview.appendChild(host);
      } else {
        const error = this.doc.createElement("span");
        error.className = "preview-error";
        error.textContent = ` [${segment.content}${segment.position !== undefined ? ` at ${segment.position}` : ""}] `;
        this.els.preview.appendChild(error);
      }
    }
  }

  private renderPager(response: SearchResponse | null): void {
    if (!response || response.total_hits === 0) {
      this.els.pager.textContent = "";
      this.els.prev.disabled = true;
      this.els.next.disabled = true;
      return;
    }
    const view = pagerView(response.total_hits, this.state.page, PAGE_SIZE);
    this.els.pager.textContent = view.label;
    this.els.prev.disabled = !view.hasPrev;
    this.els.next.disabled = !view.hasNext;
  }

  private setStatus(text: string, flavor: "info" | "error" = "info"): void {
    this.els.status.textContent = text;
    this.els.status.className = flavor === "error" ? "status error" : "status";
  }

  private showBanner(): void {
    this.els.banner.hidden = false;
  }

  private hideBanner(): void {
    this.els.banner.hidden = true;
  }
}

export function bootstrap(doc: Document, win: Window, baseUrl = ""): App {
  const app = new App(doc, win, grabElements(doc), new SearchClient(baseUrl));
  app.init();
  return app;
}
