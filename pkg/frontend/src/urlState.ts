/** The whole view state lives in the URL query string, so every result page
 * is shareable and the back button works. */

import type { MathFormat } from "./api.js";

export interface ViewState {
  query: string;
  mode: MathFormat;
  page: number;
}

export const DEFAULT_STATE: ViewState = { query: "", mode: "latex", page: 0 };

export function encodeState(state: ViewState): string {
  const params = new URLSearchParams();
  if (state.query) params.set("q", state.query);
  if (state.mode !== DEFAULT_STATE.mode) params.set("mode", state.mode);
  if (state.page > 0) params.set("page", String(state.page));
  const encoded = params.toString();
  return encoded ? `?${encoded}` : "";
}

export function decodeState(search: string): ViewState {
  const params = new URLSearchParams(search.startsWith("?") ? search.slice(1) : search);
  const mode = params.get("mode");
  const rawPage = Number(params.get("page") ?? "0");
  return {
    query: params.get("q") ?? "",
    mode: mode === "mathml" ? "mathml" : "latex",
    page: Number.isInteger(rawPage) && rawPage > 0 ? rawPage : 0,
  };
}
