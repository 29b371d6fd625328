import { existsSync, mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

import { afterAll, afterEach, beforeAll, describe, expect, it, vi } from "vitest";

import { main } from "../src/main.js";

const fx = (name: string): string =>
  fileURLToPath(new URL(`./fixtures/${name}`, import.meta.url));

let scratch: string;

beforeAll(() => {
  scratch = mkdtempSync(join(tmpdir(), "figcli-"));
  vi.spyOn(console, "log").mockImplementation(() => {});
  vi.spyOn(console, "error").mockImplementation(() => {});
});

afterAll(() => {
  rmSync(scratch, { recursive: true, force: true });
});

afterEach(() => {
  vi.clearAllMocks();
});

describe("sets command", () => {
  it("writes an SVG file", () => {
    const out = join(scratch, "sets.svg");
    const code = main([
      "sets",
      "--algebra", `small=${fx("sets_algebra_small.csv")}`,
      "--algebra", `large=${fx("sets_algebra_large.csv")}`,
      "--group", `small=${fx("sets_group_small.csv")}`,
      "--group", `large=${fx("sets_group_large.csv")}`,
      "--block", "position",
      "--pair", "xy",
      "--out", out,
    ]);
    expect(code).toBe(0);
    expect(existsSync(out)).toBe(true);
    expect(readFileSync(out, "utf8").startsWith("<svg ")).toBe(true);
  });

  it("fails usage errors with exit 2", () => {
    expect(main(["sets", "--block", "position"])).toBe(2);
    expect(main(["sets", "--bogus", "x"])).toBe(2);
    expect(main(["sets", "--algebra", "nolabel"])).toBe(2);
  });

  it("fails on unreadable input with exit 1", () => {
    const code = main([
      "sets",
      "--algebra", `a=${join(scratch, "missing.csv")}`,
      "--block", "position",
      "--pair", "xy",
      "--out", join(scratch, "x.svg"),
    ]);
    expect(code).toBe(1);
  });
});

describe("histories command", () => {
  it("writes an SVG file", () => {
    const out = join(scratch, "histories.svg");
    const code = main([
      "histories",
      "--case", `small=${fx("history_small.csv")}:${fx("bounds_small.json")}`,
      "--case", `large=${fx("history_large.csv")}:${fx("bounds_large.json")}`,
      "--out", out,
    ]);
    expect(code).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("</svg>");
  });

  it("rejects a malformed --case value", () => {
    expect(main(["histories", "--case", "small=history-only.csv", "--out", "x.svg"])).toBe(2);
  });
});

describe("dispatch", () => {
  it("prints usage and exits 0 with no arguments", () => {
    expect(main([])).toBe(0);
    expect(main(["--help"])).toBe(0);
  });

  it("rejects unknown commands", () => {
    expect(main(["scatter"])).toBe(2);
  });
});
