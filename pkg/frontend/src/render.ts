/* DOM rendering for the console.
 *
 * Pure view layer: builds elements from decoded server documents and
 * wires the supplied handlers.  Every numeric display goes through
 * num(), which prints RawNumber.raw, so the screen shows server bytes
 * and nothing computed here.
 */

import { RawNumber } from "./json.js";
import {
  RecommendationView,
  SessionView,
  VoiReportView,
} from "./types.js";

export interface Handlers {
  onStartUpload(text: string): void;
  onStartExisting(modelId: string): void;
  onObserve(variable: string, state: string): void;
  onDecide(decision: string, action: string): void;
  onVoi(): void;
  onNewSession(): void;
}

export interface SessionScreen {
  view: SessionView;
  voi: VoiReportView | null;
  recommendation: RecommendationView | null;
  error: string | null;
}

type Child = Node | string;

function el(
  doc: Document,
  tag: string,
  attrs: { [key: string]: string } = {},
  children: Child[] = [],
): HTMLElement {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  for (const c of children) {
    node.append(c);
  }
  return node;
}

function num(doc: Document, value: RawNumber, field: string): HTMLElement {
  return el(doc, "span", { class: "num", "data-field": field }, [value.raw]);
}

function section(doc: Document, cls: string, title: string, children: Child[]): HTMLElement {
  return el(doc, "section", { class: cls }, [
    el(doc, "h2", {}, [title]),
    ...children,
  ]);
}

export function renderError(doc: Document, error: string | null): HTMLElement {
  const banner = el(doc, "div", { class: "banner", "data-field": "error" });
  if (error !== null) {
    banner.classList.add("active");
    banner.append(error);
  }
  return banner;
}

export function renderSetup(
  root: HTMLElement,
  error: string | null,
  handlers: Handlers,
): void {
  const doc = root.ownerDocument;
  root.replaceChildren();
  const text = el(doc, "textarea", {
    id: "model-text",
    rows: "14",
    placeholder: "paste a model document",
  }) as HTMLTextAreaElement;
  const upload = el(doc, "button", { id: "start-upload" }, ["upload and start"]);
  upload.addEventListener("click", () => handlers.onStartUpload(text.value));
  const idInput = el(doc, "input", {
    id: "model-id",
    placeholder: "existing model id",
  }) as HTMLInputElement;
  const attach = el(doc, "button", { id: "start-existing" }, ["start session"]);
  attach.addEventListener("click", () => handlers.onStartExisting(idInput.value.trim()));
  root.append(
    el(doc, "div", { class: "setup" }, [
      el(doc, "h1", {}, ["idvoi console"]),
      renderError(doc, error),
      el(doc, "p", {}, ["Paste a model document and start a session:"]),
      text,
      el(doc, "div", { class: "row" }, [upload]),
      el(doc, "p", {}, ["Or start a session on a model already uploaded:"]),
      el(doc, "div", { class: "row" }, [idInput, attach]),
    ]),
  );
}

function evidenceMap(view: SessionView): Map<string, string> {
  const out = new Map<string, string>();
  for (const item of view.evidence) out.set(item.name, item.value);
  return out;
}

function renderTimeline(doc: Document, view: SessionView): HTMLElement {
  const committed = evidenceMap(view);
  const items: HTMLElement[] = [];
  for (const item of view.timeline) {
    if (item.kind === "I") {
      if (item.members.length === 0) continue;
      const parts: Child[] = [];
      for (const name of item.members) {
        const state = committed.get(name);
        const label = state === undefined ? name : `${name}=${state}`;
        const cls = state === undefined ? "tl-var" : "tl-var done";
        parts.push(el(doc, "span", { class: cls, "data-var": name }, [label]));
        parts.push(" ");
      }
      parts.pop();
      const wrapped: Child[] =
        item.members.length > 1 ? ["{", ...parts, "}"] : parts;
      items.push(el(doc, "li", { class: "tl-set" }, wrapped));
    } else {
      const action = committed.get(item.name);
      const pendingName = view.pending === null ? null : view.pending.name;
      let cls = "tl-decision";
      if (action !== undefined) cls += " done";
      if (item.name === pendingName) cls += " pending";
      const label = action === undefined ? item.name : `${item.name}=${action}`;
      items.push(el(doc, "li", { class: cls, "data-decision": item.name }, [label]));
    }
  }
  return section(doc, "timeline", "timeline", [el(doc, "ol", {}, items)]);
}

function renderStatus(doc: Document, view: SessionView): HTMLElement {
  const stage: Child[] =
    view.nDecisions.num === 0
      ? ["posterior view (no decisions)"]
      : view.pending === null
        ? ["terminal"]
        : [
            "stage ",
            num(doc, view.stage, "stage"),
            " of ",
            num(doc, view.nDecisions, "n_decisions"),
          ];
  return el(doc, "section", { class: "status" }, [
    el(doc, "span", { class: "stage" }, stage),
    el(doc, "span", {}, [
      view.nDecisions.num === 0 ? "expected utility " : "maximum expected utility ",
      num(doc, view.meu, "meu"),
    ]),
    el(doc, "span", {}, [
      "evidence probability ",
      num(doc, view.evidenceProbability, "evidence_probability"),
    ]),
  ]);
}

function renderEvidence(doc: Document, view: SessionView): HTMLElement {
  const rows = view.evidence.map((item) =>
    el(doc, "li", { class: item.kind }, [
      `${item.kind} ${item.name}=${item.value}`,
    ]),
  );
  const body =
    rows.length === 0
      ? [el(doc, "p", { class: "empty" }, ["no evidence committed"])]
      : [el(doc, "ol", {}, rows)];
  return section(doc, "evidence", "evidence", body);
}

function renderObserve(
  doc: Document,
  view: SessionView,
  handlers: Handlers,
): HTMLElement {
  const rows = view.candidates.map((c) => {
    const select = el(doc, "select", { id: `cand-${c.name}` }) as HTMLSelectElement;
    for (const s of c.states) select.append(el(doc, "option", { value: s }, [s]));
    const button = el(doc, "button", { "data-observe": c.name }, ["observe"]);
    button.addEventListener("click", () => handlers.onObserve(c.name, select.value));
    return el(doc, "li", { class: "candidate", "data-var": c.name }, [
      el(doc, "span", { class: "cand-name" }, [c.name]),
      el(doc, "span", { class: "interval" }, [
        " [I_",
        num(doc, c.lowerBound, `lower_bound:${c.name}`),
        ", I_",
        num(doc, c.modeled, `modeled:${c.name}`),
        "] ",
      ]),
      select,
      button,
    ]);
  });
  const body =
    rows.length === 0
      ? [el(doc, "p", { class: "empty" }, ["no legal observations at this stage"])]
      : [el(doc, "ul", {}, rows)];
  return section(doc, "observe", "observe", body);
}

function renderDecision(
  doc: Document,
  view: SessionView,
  handlers: Handlers,
): HTMLElement | null {
  if (view.pending === null) return null;
  const pending = view.pending;
  const buttons = pending.actions.map((a) => {
    const b = el(doc, "button", { "data-decide": a }, [a]);
    b.addEventListener("click", () => handlers.onDecide(pending.name, a));
    return b;
  });
  const voiButton = el(doc, "button", { id: "compute-voi" }, [
    "value of information",
  ]);
  voiButton.addEventListener("click", () => handlers.onVoi());
  return section(doc, "decision", `pending decision ${pending.name}`, [
    el(doc, "div", { class: "row" }, ["decide: ", ...buttons]),
    el(doc, "div", { class: "row" }, [voiButton]),
  ]);
}

function renderVoi(doc: Document, voi: VoiReportView): HTMLElement {
  const rows = voi.candidates.map((c) => {
    const cls = c.legal ? "voi-bar" : "voi-bar illegal";
    const parts: Child[] = [el(doc, "span", { class: "cand-name" }, [c.name])];
    if (c.legal && c.voi !== null) {
      parts.push(el(doc, "span", { class: "bar" }));
      parts.push(num(doc, c.voi, `voi:${c.name}`));
      if (c.method !== null) {
        parts.push(el(doc, "span", { class: "method" }, [` (${c.method})`]));
      }
      const jump = el(doc, "button", { "data-voi-observe": c.name }, ["observe"]);
      jump.addEventListener("click", () => {
        const select = doc.getElementById(`cand-${c.name}`);
        if (select !== null) (select as HTMLSelectElement).focus();
      });
      parts.push(jump);
    } else {
      parts.push(
        el(doc, "span", { class: "reason" }, [c.reason ?? "illegal"]),
      );
    }
    return el(doc, "li", { class: cls, "data-var": c.name }, parts);
  });
  const body: Child[] = [
    el(doc, "p", {}, [
      "baseline ",
      num(doc, voi.baseline, "baseline"),
      el(doc, "span", { class: "method" }, [
        " (",
        num(doc, voi.propagations, "propagations"),
        " propagations)",
      ]),
    ]),
  ];
  body.push(
    rows.length === 0
      ? el(doc, "p", { class: "empty" }, ["no candidates"])
      : el(doc, "ul", { class: "voi-bars" }, rows),
  );
  return section(doc, "voi", `value of information before ${voi.decision}`, body);
}

function renderRecommendation(
  doc: Document,
  rec: RecommendationView,
  handlers: Handlers,
): HTMLElement {
  const rows = rec.utilities.map((u) => {
    const cls = u.action === rec.best ? "rec-row best" : "rec-row";
    const button = el(doc, "button", { "data-rec-decide": u.action }, ["decide"]);
    button.addEventListener("click", () => handlers.onDecide(rec.decision, u.action));
    return el(doc, "li", { class: cls, "data-action": u.action }, [
      el(doc, "span", { class: "action" }, [u.action]),
      num(doc, u.eu, `eu:${u.action}`),
      button,
    ]);
  });
  return section(doc, "recommendation", `recommendation for ${rec.decision}`, [
    el(doc, "p", {}, [`best action: ${rec.best}`]),
    el(doc, "ul", {}, rows),
  ]);
}

function renderSummary(doc: Document, view: SessionView): HTMLElement {
  return section(doc, "summary", "session complete", [
    el(doc, "p", {}, [
      "All decisions are committed. Realized expected utility: ",
      num(doc, view.meu, "meu_final"),
    ]),
  ]);
}

export function renderSession(
  root: HTMLElement,
  screen: SessionScreen,
  handlers: Handlers,
): void {
  const doc = root.ownerDocument;
  const view = screen.view;
  root.replaceChildren();
  const reset = el(doc, "button", { id: "new-session" }, ["new session"]);
  reset.addEventListener("click", () => handlers.onNewSession());
  const header = el(doc, "header", {}, [
    el(doc, "h1", {}, ["idvoi console"]),
    el(doc, "span", { class: "ids" }, [
      `model ${view.modelId} | session ${view.id}`,
    ]),
    reset,
  ]);
  const parts: Child[] = [
    header,
    renderError(doc, screen.error),
    renderStatus(doc, view),
    renderTimeline(doc, view),
  ];
  const terminal = view.pending === null && view.nDecisions.num > 0;
  if (terminal) parts.push(renderSummary(doc, view));
  parts.push(renderEvidence(doc, view));
  parts.push(renderObserve(doc, view, handlers));
  const decision = renderDecision(doc, view, handlers);
  if (decision !== null) parts.push(decision);
  if (screen.voi !== null) parts.push(renderVoi(doc, screen.voi));
  if (screen.recommendation !== null) {
    parts.push(renderRecommendation(doc, screen.recommendation, handlers));
  }
  root.append(el(doc, "div", { class: "console" }, parts));
}
