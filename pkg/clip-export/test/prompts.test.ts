import { describe, expect, it } from "vitest";

import { renderPrompts } from "../src/prompts.js";
import { agnosticPrompts, clipartPrompts, officeHomeClasses,
         realWorldPrompts } from "./office_home_lists.js";

describe("prompt templates against the published lists", () => {
  it("has the full 65-class list", () => {
    expect(officeHomeClasses).toHaveLength(65);
  });

  it("real world prompts byte-match", () => {
    expect(renderPrompts(officeHomeClasses, "real world")).toEqual(realWorldPrompts);
  });

  it("clipart prompts byte-match", () => {
    expect(renderPrompts(officeHomeClasses, "clipart")).toEqual(clipartPrompts);
  });

  it("agnostic prompts byte-match", () => {
    expect(renderPrompts(officeHomeClasses)).toEqual(agnosticPrompts);
  });

  it("keeps the article 'a' before vowel-initial names", () => {
    expect(renderPrompts(["Alarm Clock"], "real world"))
      .toEqual(["a real world photo of a Alarm Clock"]);
    expect(renderPrompts(["Eraser"])).toEqual(["a photo of a Eraser"]);
  });

  it("rejects duplicates and empty lists", () => {
    expect(() => renderPrompts([])).toThrow(/empty/);
    expect(() => renderPrompts(["Pen", "Pen"])).toThrow(/duplicates/);
  });
});
