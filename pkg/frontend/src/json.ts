/* JSON parser that keeps the raw text of every number.
 *
 * The service renders numbers with Python's repr (80.0, 1e-09, ...);
 * JSON.parse followed by String() would reformat them (80, 1e-9).  The
 * console must display server bytes verbatim, so numbers are boxed with
 * the exact substring they were parsed from and rendering always uses
 * `.raw`, never a recomputed string.
 */

export interface RawNumber {
  kind: "number";
  raw: string;
  num: number;
}

export type JsonValue =
  | null
  | boolean
  | string
  | RawNumber
  | JsonValue[]
  | JsonObject;

export interface JsonObject {
  [key: string]: JsonValue;
}

export class JsonError extends Error {}

const NUMBER_RE = /-?(?:0|[1-9][0-9]*)(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?/y;
const ESCAPES: { [key: string]: string } = {
  '"': '"',
  "\\": "\\",
  "/": "/",
  b: "\b",
  f: "\f",
  n: "\n",
  r: "\r",
  t: "\t",
};

class Parser {
  pos = 0;

  constructor(readonly text: string) {}

  fail(message: string): never {
    throw new JsonError(`${message} at offset ${this.pos}`);
  }

  ws(): void {
    while (this.pos < this.text.length && " \t\n\r".includes(this.text[this.pos])) {
      this.pos += 1;
    }
  }

  literal(word: string, value: JsonValue): JsonValue {
    if (this.text.startsWith(word, this.pos)) {
      this.pos += word.length;
      return value;
    }
    this.fail(`expected ${word}`);
  }

  string(): string {
    this.pos += 1; // opening quote
    let out = "";
    for (;;) {
      if (this.pos >= this.text.length) this.fail("unterminated string");
      const ch = this.text[this.pos];
      if (ch === '"') {
        this.pos += 1;
        return out;
      }
      if (ch === "\\") {
        const esc = this.text[this.pos + 1];
        if (esc === "u") {
          const hex = this.text.slice(this.pos + 2, this.pos + 6);
          if (!/^[0-9a-fA-F]{4}$/.test(hex)) this.fail("bad unicode escape");
          out += String.fromCharCode(parseInt(hex, 16));
          this.pos += 6;
        } else if (esc in ESCAPES) {
          out += ESCAPES[esc];
          this.pos += 2;
        } else {
          this.fail(`bad escape \\${esc}`);
        }
      } else {
        out += ch;
        this.pos += 1;
      }
    }
  }

  number(): RawNumber {
    NUMBER_RE.lastIndex = this.pos;
    const m = NUMBER_RE.exec(this.text);
    if (m === null || m.index !== this.pos) this.fail("bad number");
    this.pos += m[0].length;
    return { kind: "number", raw: m[0], num: Number(m[0]) };
  }

  array(): JsonValue[] {
    this.pos += 1; // [
    const out: JsonValue[] = [];
    this.ws();
    if (this.text[this.pos] === "]") {
      this.pos += 1;
      return out;
    }
    for (;;) {
      out.push(this.value());
      this.ws();
      const ch = this.text[this.pos];
      this.pos += 1;
      if (ch === "]") return out;
      if (ch !== ",") this.fail("expected , or ]");
    }
  }

  object(): JsonObject {
    this.pos += 1; // {
    const out: JsonObject = {};
    this.ws();
    if (this.text[this.pos] === "}") {
      this.pos += 1;
      return out;
    }
    for (;;) {
      this.ws();
      if (this.text[this.pos] !== '"') this.fail("expected object key");
      const key = this.string();
      this.ws();
      if (this.text[this.pos] !== ":") this.fail("expected :");
      this.pos += 1;
      out[key] = this.value();
      this.ws();
      const ch = this.text[this.pos];
      this.pos += 1;
      if (ch === "}") return out;
      if (ch !== ",") this.fail("expected , or }");
    }
  }

  value(): JsonValue {
    this.ws();
    const ch = this.text[this.pos];
    if (ch === undefined) this.fail("unexpected end of input");
    if (ch === "{") return this.object();
    if (ch === "[") return this.array();
    if (ch === '"') return this.string();
    if (ch === "t") return this.literal("true", true);
    if (ch === "f") return this.literal("false", false);
    if (ch === "n") return this.literal("null", null);
    return this.number();
  }
}

export function parseJson(text: string): JsonValue {
  const p = new Parser(text);
  const v = p.value();
  p.ws();
  if (p.pos !== text.length) p.fail("trailing data");
  return v;
}

/* Narrowing helpers: decode layers use these so a malformed response
 * raises one typed error the app can surface instead of NaN leaking
 * into the screen. */

export function isRawNumber(v: JsonValue): v is RawNumber {
  return typeof v === "object" && v !== null && !Array.isArray(v) && (v as RawNumber).kind === "number";
}

export function asObject(v: JsonValue, ctx: string): JsonObject {
  if (typeof v === "object" && v !== null && !Array.isArray(v) && !isRawNumber(v)) return v;
  throw new JsonError(`${ctx}: expected object`);
}

export function asArray(v: JsonValue, ctx: string): JsonValue[] {
  if (Array.isArray(v)) return v;
  throw new JsonError(`${ctx}: expected array`);
}

export function asString(v: JsonValue, ctx: string): string {
  if (typeof v === "string") return v;
  throw new JsonError(`${ctx}: expected string`);
}

export function asNumber(v: JsonValue, ctx: string): RawNumber {
  if (isRawNumber(v)) return v;
  throw new JsonError(`${ctx}: expected number`);
}

export function asBoolean(v: JsonValue, ctx: string): boolean {
  if (typeof v === "boolean") return v;
  throw new JsonError(`${ctx}: expected boolean`);
}
