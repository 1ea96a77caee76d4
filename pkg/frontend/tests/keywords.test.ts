import { describe, expect, it } from "vitest";

import { HIGHLIGHT_LIMIT, KeywordDraft } from "../src/keywords.js";

describe("KeywordDraft", () => {
  it("trims entries and keeps them in the order added", () => {
    const draft = new KeywordDraft();
    expect(draft.add("  ceasefire ")).toBe("added");
    expect(draft.add("militia")).toBe("added");
    expect([...draft.words]).toEqual(["ceasefire", "militia"]);
  });

  it("rejects blank input", () => {
    const draft = new KeywordDraft();
    expect(draft.add("   ")).toBe("blank");
    expect(draft.canSubmit()).toBe(false);
  });

  it("rejects duplicates before anything reaches the server", () => {
    const draft = new KeywordDraft();
    draft.add("ceasefire");
    expect(draft.add("ceasefire")).toBe("duplicate");
    expect(draft.add(" ceasefire  ")).toBe("duplicate");
    expect(draft.words.length).toBe(1);
  });

  it("accepts any count but highlights at most the limit", () => {
    const draft = new KeywordDraft();
    for (let i = 0; i < HIGHLIGHT_LIMIT + 2; i++) {
      expect(draft.add(`word${i}`)).toBe("added");
    }
    expect(draft.words.length).toBe(HIGHLIGHT_LIMIT + 2);
    expect(draft.highlighted().length).toBe(HIGHLIGHT_LIMIT);
    expect(draft.overflow()).toEqual(["word10", "word11"]);
  });

  it("needs at least one word to submit", () => {
    const draft = new KeywordDraft();
    expect(draft.canSubmit()).toBe(false);
    draft.add("one");
    expect(draft.canSubmit()).toBe(true);
    draft.remove("one");
    expect(draft.canSubmit()).toBe(false);
  });

  it("remove reports whether the word was present", () => {
    const draft = new KeywordDraft();
    draft.add("one");
    expect(draft.remove("two")).toBe(false);
    expect(draft.remove("one")).toBe(true);
    expect(draft.words.length).toBe(0);
  });
});
