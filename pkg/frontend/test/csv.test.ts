import { describe, expect, it } from "vitest";

import { columnIndices, numberAt, parseCsv } from "../src/csv.js";

describe("parseCsv", () => {
  it("splits header and rows", () => {
    const t = parseCsv("a,b,c\n1,2,3\n4,5,6\n", "x.csv");
    expect(t.header).toEqual(["a", "b", "c"]);
    expect(t.rows).toEqual([["1", "2", "3"], ["4", "5", "6"]]);
  });

  it("handles CRLF and missing final newline", () => {
    const t = parseCsv("a,b\r\n1,2\r\n3,4", "x.csv");
    expect(t.rows).toEqual([["1", "2"], ["3", "4"]]);
  });

  it("rejects ragged rows, naming the row", () => {
    expect(() => parseCsv("a,b\n1,2\n1,2,3\n", "x.csv")).toThrow(
      'x.csv: row 2 has 3 fields, header has 2',
    );
  });

  it("rejects empty input", () => {
    expect(() => parseCsv("", "x.csv")).toThrow("x.csv: empty file");
  });
});

describe("columnIndices", () => {
  it("maps names to positions", () => {
    const t = parseCsv("run,time,u\n0,0.0,1\n", "x.csv");
    expect(columnIndices(t, ["time", "run"], "x.csv")).toEqual([1, 0]);
  });

  it("names the first missing column", () => {
    const t = parseCsv("run,time\n0,0.0\n", "x.csv");
    expect(() => columnIndices(t, ["run", "zp_x"], "x.csv")).toThrow(
      'x.csv: missing column "zp_x"',
    );
  });
});

describe("numberAt", () => {
  it("parses repr-style floats", () => {
    expect(numberAt(["1.1754943508222875e-38"], 0, "x.csv")).toBeCloseTo(1.1754943508222875e-38);
    expect(numberAt(["-0.25"], 0, "x.csv")).toBe(-0.25);
  });

  it("rejects blanks and text", () => {
    expect(() => numberAt([""], 0, "x.csv")).toThrow("x.csv: not a number");
    expect(() => numberAt(["abc"], 0, "x.csv")).toThrow('x.csv: not a number: "abc"');
    expect(() => numberAt(["1"], 5, "x.csv")).toThrow("x.csv: not a number");
  });
});
