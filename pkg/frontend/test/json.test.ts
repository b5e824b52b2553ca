import { describe, expect, it } from "vitest";

import {
  JsonError,
  JsonObject,
  RawNumber,
  asArray,
  asNumber,
  asObject,
  asString,
  isRawNumber,
  parseJson,
} from "../src/json.js";

describe("parseJson", () => {
  it("keeps the raw text of numbers", () => {
    const o = parseJson('{"meu": 80.0, "p": 1.0, "tiny": 1e-09}') as JsonObject;
    expect((o.meu as RawNumber).raw).toBe("80.0");
    expect((o.meu as RawNumber).num).toBe(80);
    expect((o.p as RawNumber).raw).toBe("1.0");
    expect((o.tiny as RawNumber).raw).toBe("1e-09");
    expect((o.tiny as RawNumber).num).toBe(1e-9);
  });

  it("distinguishes tokens String() would collapse", () => {
    const o = parseJson('{"a": 80.0, "b": 80}') as JsonObject;
    expect(String((o.a as RawNumber).num)).toBe("80");
    expect((o.a as RawNumber).raw).toBe("80.0");
    expect((o.b as RawNumber).raw).toBe("80");
  });

  it("parses negatives, exponents, and zero forms", () => {
    const arr = parseJson("[-0.5, 2.5e3, -7, 0.0, 0]") as RawNumber[];
    expect(arr.map((n) => n.raw)).toEqual(["-0.5", "2.5e3", "-7", "0.0", "0"]);
    expect(arr.map((n) => n.num)).toEqual([-0.5, 2500, -7, 0, 0]);
  });

  it("parses nested structures, literals, and escapes", () => {
    const v = parseJson(
      '{"rows": [{"ok": true, "x": null}], "s": "a\\n\\"b\\" \\u0041"}',
    ) as JsonObject;
    const rows = asArray(v.rows, "rows");
    expect(asObject(rows[0], "row").ok).toBe(true);
    expect(asObject(rows[0], "row").x).toBeNull();
    expect(asString(v.s, "s")).toBe('a\n"b" A');
  });

  it("handles whitespace the canonical renderer emits", () => {
    const text = '{\n  "candidates": [\n    {\n      "voi": 12.0\n    }\n  ]\n}\n';
    const v = asObject(parseJson(text), "doc");
    const rows = asArray(v.candidates, "candidates");
    expect(asNumber(asObject(rows[0], "row").voi, "voi").raw).toBe("12.0");
  });

  it("rejects trailing data", () => {
    expect(() => parseJson('{"a": 1} x')).toThrow(JsonError);
  });

  it("rejects bad escapes and unterminated strings", () => {
    expect(() => parseJson('"\\q"')).toThrow(JsonError);
    expect(() => parseJson('"abc')).toThrow(JsonError);
    expect(() => parseJson('"\\u12g4"')).toThrow(JsonError);
  });

  it("rejects malformed numbers and structures", () => {
    expect(() => parseJson("01")).toThrow(JsonError);
    expect(() => parseJson("[1, ")).toThrow(JsonError);
    expect(() => parseJson('{"a" 1}')).toThrow(JsonError);
    expect(() => parseJson("")).toThrow(JsonError);
  });
});

describe("narrowing helpers", () => {
  it("isRawNumber separates boxes from plain objects", () => {
    expect(isRawNumber(parseJson("3.5"))).toBe(true);
    expect(isRawNumber(parseJson('{"kind": "x"}'))).toBe(false);
    expect(isRawNumber("3.5")).toBe(false);
  });

  it("as* helpers throw JsonError with context", () => {
    expect(() => asNumber("x", "field")).toThrow(/field: expected number/);
    expect(() => asObject([], "doc")).toThrow(/doc: expected object/);
    expect(() => asArray("x", "rows")).toThrow(/rows: expected array/);
    expect(() => asString(null, "name")).toThrow(/name: expected string/);
  });
});
