/* Thin fetch client for the session service.
 *
 * Every response is returned with its raw body text alongside the parsed
 * value; callers render from the parse and tests compare the screen
 * against the raw bytes.  The optional observer sees every response,
 * which is how the end-to-end suite instruments the traffic.
 */

import { JsonValue, parseJson } from "./json.js";

export interface ApiResponse {
  status: number;
  raw: string;
  body: JsonValue | null;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export type StepBody =
  | { observe: { variable: string; state: string } }
  | { decide: { decision: string; action: string } };

export class Api {
  constructor(
    readonly base: string = "",
    readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
    readonly observer?: (path: string, res: ApiResponse) => void,
  ) {}

  private async request(
    method: string,
    path: string,
    body?: string,
    contentType?: string,
  ): Promise<ApiResponse> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = body;
      init.headers = { "content-type": contentType ?? "application/json" };
    }
    const res = await this.fetchImpl(this.base + path, init);
    const raw = await res.text();
    const isJson = (res.headers.get("content-type") ?? "").includes("json");
    const out: ApiResponse = {
      status: res.status,
      raw,
      body: isJson ? parseJson(raw) : null,
    };
    this.observer?.(path, out);
    return out;
  }

  uploadModel(text: string): Promise<ApiResponse> {
    return this.request("POST", "/models", text, "text/plain");
  }

  getModel(id: string): Promise<ApiResponse> {
    return this.request("GET", `/models/${encodeURIComponent(id)}`);
  }

  createSession(modelId: string): Promise<ApiResponse> {
    return this.request("POST", "/sessions", JSON.stringify({ model_id: modelId }));
  }

  getSession(sid: string): Promise<ApiResponse> {
    return this.request("GET", `/sessions/${encodeURIComponent(sid)}`);
  }

  step(sid: string, step: StepBody): Promise<ApiResponse> {
    return this.request(
      "POST",
      `/sessions/${encodeURIComponent(sid)}/steps`,
      JSON.stringify(step),
    );
  }

  voi(sid: string, decision: string, candidates?: string[]): Promise<ApiResponse> {
    const params = new URLSearchParams({ decision });
    if (candidates !== undefined) params.set("candidates", candidates.join(","));
    return this.request(
      "GET",
      `/sessions/${encodeURIComponent(sid)}/voi?${params.toString()}`,
    );
  }

  recommendation(sid: string): Promise<ApiResponse> {
    return this.request("GET", `/sessions/${encodeURIComponent(sid)}/recommendation`);
  }
}
