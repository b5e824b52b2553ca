/* Typed mirrors of the service documents.
 *
 * Numeric fields stay boxed as RawNumber so the renderer can only ever
 * show the server's own text for a number.  Decoders throw JsonError on
 * shape mismatches; the app turns that into the error surface.
 */

import {
  JsonObject,
  JsonValue,
  RawNumber,
  asArray,
  asBoolean,
  asNumber,
  asObject,
  asString,
  isRawNumber,
} from "./json.js";

export interface TimelineSet {
  kind: "I";
  index: RawNumber;
  members: string[];
}

export interface TimelineDecision {
  kind: "D";
  index: RawNumber;
  name: string;
  actions: string[];
}

export type TimelineItem = TimelineSet | TimelineDecision;

export interface EvidenceItem {
  kind: "observe" | "decide";
  name: string;
  value: string;
}

export interface Candidate {
  name: string;
  lowerBound: RawNumber;
  modeled: RawNumber;
  states: string[];
}

export interface PendingDecision {
  name: string;
  actions: string[];
}

export interface SessionView {
  id: string;
  modelId: string;
  stage: RawNumber;
  nDecisions: RawNumber;
  timeline: TimelineItem[];
  evidence: EvidenceItem[];
  pending: PendingDecision | null;
  candidates: Candidate[];
  meu: RawNumber;
  evidenceProbability: RawNumber;
}

export interface VoiRow {
  name: string;
  legal: boolean;
  reason: string | null;
  method: string | null;
  euo: RawNumber | null;
  voi: RawNumber | null;
  propagations: RawNumber | null;
}

export interface VoiReportView {
  decision: string;
  baseline: RawNumber;
  propagations: RawNumber;
  candidates: VoiRow[];
}

export interface RecommendationRow {
  action: string;
  eu: RawNumber;
}

export interface RecommendationView {
  decision: string;
  best: string;
  bestIndex: RawNumber;
  utilities: RecommendationRow[];
}

function strings(v: JsonValue, ctx: string): string[] {
  return asArray(v, ctx).map((x, i) => asString(x, `${ctx}[${i}]`));
}

function maybeString(v: JsonValue, ctx: string): string | null {
  return v === null ? null : asString(v, ctx);
}

function maybeNumber(v: JsonValue, ctx: string): RawNumber | null {
  if (v === null) return null;
  if (isRawNumber(v)) return v;
  return asNumber(v, ctx);
}

function decodeTimelineItem(v: JsonValue, ctx: string): TimelineItem {
  const o = asObject(v, ctx);
  const kind = asString(o.kind, `${ctx}.kind`);
  if (kind === "I") {
    return {
      kind: "I",
      index: asNumber(o.index, `${ctx}.index`),
      members: strings(o.members, `${ctx}.members`),
    };
  }
  if (kind === "D") {
    return {
      kind: "D",
      index: asNumber(o.index, `${ctx}.index`),
      name: asString(o.name, `${ctx}.name`),
      actions: strings(o.actions, `${ctx}.actions`),
    };
  }
  throw new Error(`${ctx}: unknown timeline kind ${kind}`);
}

function decodeEvidenceItem(v: JsonValue, ctx: string): EvidenceItem {
  const o = asObject(v, ctx);
  const kind = asString(o.kind, `${ctx}.kind`);
  if (kind === "observe") {
    return {
      kind,
      name: asString(o.variable, `${ctx}.variable`),
      value: asString(o.state, `${ctx}.state`),
    };
  }
  return {
    kind: "decide",
    name: asString(o.decision, `${ctx}.decision`),
    value: asString(o.action, `${ctx}.action`),
  };
}

export function decodeSessionView(v: JsonValue): SessionView {
  const o = asObject(v, "view");
  const pending =
    o.pending_decision === null
      ? null
      : (() => {
          const p = asObject(o.pending_decision, "view.pending_decision");
          return {
            name: asString(p.name, "pending.name"),
            actions: strings(p.actions, "pending.actions"),
          };
        })();
  return {
    id: asString(o.id, "view.id"),
    modelId: asString(o.model_id, "view.model_id"),
    stage: asNumber(o.stage, "view.stage"),
    nDecisions: asNumber(o.n_decisions, "view.n_decisions"),
    timeline: asArray(o.timeline, "view.timeline").map((x, i) =>
      decodeTimelineItem(x, `timeline[${i}]`),
    ),
    evidence: asArray(o.evidence, "view.evidence").map((x, i) =>
      decodeEvidenceItem(x, `evidence[${i}]`),
    ),
    pending,
    candidates: asArray(o.candidates, "view.candidates").map((x, i) => {
      const c = asObject(x, `candidates[${i}]`);
      return {
        name: asString(c.name, "candidate.name"),
        lowerBound: asNumber(c.lower_bound, "candidate.lower_bound"),
        modeled: asNumber(c.modeled, "candidate.modeled"),
        states: strings(c.states, "candidate.states"),
      };
    }),
    meu: asNumber(o.meu, "view.meu"),
    evidenceProbability: asNumber(o.evidence_probability, "view.evidence_probability"),
  };
}

export function decodeVoiReport(v: JsonValue): VoiReportView {
  const o = asObject(v, "voi");
  return {
    decision: asString(o.decision, "voi.decision"),
    baseline: asNumber(o.baseline, "voi.baseline"),
    propagations: asNumber(o.propagations, "voi.propagations"),
    candidates: asArray(o.candidates, "voi.candidates").map((x, i) => {
      const c = asObject(x, `voi.candidates[${i}]`);
      const ctx = `voi.candidates[${i}]`;
      return {
        name: asString(c.name, `${ctx}.name`),
        legal: asBoolean(c.legal, `${ctx}.legal`),
        reason: maybeString(c.reason, `${ctx}.reason`),
        method: maybeString(c.method, `${ctx}.method`),
        euo: maybeNumber(c.euo, `${ctx}.euo`),
        voi: maybeNumber(c.voi, `${ctx}.voi`),
        propagations: maybeNumber(c.propagations, `${ctx}.propagations`),
      };
    }),
  };
}

export function decodeRecommendation(v: JsonValue): RecommendationView {
  const o = asObject(v, "recommendation");
  return {
    decision: asString(o.decision, "recommendation.decision"),
    best: asString(o.best, "recommendation.best"),
    bestIndex: asNumber(o.best_index, "recommendation.best_index"),
    utilities: asArray(o.utilities, "recommendation.utilities").map((x, i) => {
      const u = asObject(x, `utilities[${i}]`);
      return {
        action: asString(u.action, `utilities[${i}].action`),
        eu: asNumber(u.eu, `utilities[${i}].eu`),
      };
    }),
  };
}

export function errorMessage(body: JsonValue | null, fallback: string): string {
  if (body !== null) {
    const o = body as JsonObject;
    if (typeof o === "object" && !Array.isArray(o) && typeof o.error === "string") {
      return o.error;
    }
  }
  return fallback;
}
