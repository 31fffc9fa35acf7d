import { describe, expect, it } from "vitest";

import { DEFAULT_STATE, decodeState, encodeState } from "../src/urlState.js";

describe("url state codec", () => {
  it("defaults decode from an empty search string", () => {
    expect(decodeState("")).toEqual(DEFAULT_STATE);
    expect(decodeState("?")).toEqual(DEFAULT_STATE);
  });

  it("round-trips query, mode, and page", () => {
    const state = { query: "norm $\\frac{a}{b}$", mode: "mathml" as const, page: 3 };
    expect(decodeState(encodeState(state))).toEqual(state);
  });

  it("omits default values from the encoding", () => {
    expect(encodeState({ query: "x", mode: "latex", page: 0 })).toBe("?q=x");
    expect(encodeState(DEFAULT_STATE)).toBe("");
  });

  it("tolerates junk values", () => {
    expect(decodeState("?mode=nonsense&page=-4&q=a").mode).toBe("latex");
    expect(decodeState("?page=zz").page).toBe(0);
  });

  it("keeps unicode intact", () => {
    const state = { query: "α energy", mode: "latex" as const, page: 0 };
    expect(decodeState(encodeState(state)).query).toBe("α energy");
  });
});
