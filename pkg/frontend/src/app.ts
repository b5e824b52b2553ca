/* Console controller.
 *
 * Holds the last server documents and re-renders after every completed
 * round trip.  No optimistic updates: a step only changes the screen
 * when the service answers 200, and a 409 is shown inline with the
 * server's reason while the last good view stays up.  Actions are
 * serialized through a queue (one session per tab, single writer).
 */

import { Api, ApiResponse, StepBody } from "./api.js";
import { Handlers, renderSession, renderSetup } from "./render.js";
import {
  RecommendationView,
  SessionView,
  VoiReportView,
  decodeRecommendation,
  decodeSessionView,
  decodeVoiReport,
  errorMessage,
} from "./types.js";
import { JsonValue, asArray, asObject, asString } from "./json.js";

export interface HashBox {
  get(): string;
  set(value: string): void;
}

function uploadError(res: ApiResponse): string {
  const fallback = `upload failed (${res.status})`;
  if (res.body === null) return fallback;
  const lines = [errorMessage(res.body, fallback)];
  try {
    const o = asObject(res.body, "error");
    if (o.violations !== undefined) {
      for (const v of asArray(o.violations, "violations")) {
        const item = asObject(v, "violation");
        lines.push(
          `${asString(item.rule, "rule")}: ${asString(item.message, "message")}`,
        );
      }
    }
  } catch {
    return fallback;
  }
  return lines.join("\n");
}

export class ConsoleApp implements Handlers {
  view: SessionView | null = null;
  voi: VoiReportView | null = null;
  recommendation: RecommendationView | null = null;
  error: string | null = null;

  private queue: Promise<void> = Promise.resolve();

  constructor(
    readonly root: HTMLElement,
    readonly api: Api,
    readonly hash: HashBox,
  ) {}

  /* Wire against the real window location. */
  static browser(root: HTMLElement, api: Api): ConsoleApp {
    const win = root.ownerDocument.defaultView as Window;
    return new ConsoleApp(root, api, {
      get: () => win.location.hash,
      set: (value) => {
        win.location.hash = value;
      },
    });
  }

  /* Wait for all queued actions; used by tests after dispatching clicks. */
  idle(): Promise<void> {
    return this.queue;
  }

  private enqueue(task: () => Promise<void>): Promise<void> {
    this.queue = this.queue.then(task).catch((err: unknown) => {
      this.error = err instanceof Error ? err.message : String(err);
      this.render();
    });
    return this.queue;
  }

  render(): void {
    if (this.view === null) {
      renderSetup(this.root, this.error, this);
    } else {
      renderSession(
        this.root,
        {
          view: this.view,
          voi: this.voi,
          recommendation: this.recommendation,
          error: this.error,
        },
        this,
      );
    }
  }

  boot(): Promise<void> {
    return this.enqueue(async () => {
      const m = /^#s=(.+)$/.exec(this.hash.get());
      if (m !== null) {
        const res = await this.api.getSession(decodeURIComponent(m[1]));
        if (res.status === 200 && res.body !== null) {
          this.adoptView(res.body);
          this.render();
          return;
        }
        this.error = errorMessage(res.body, `session lookup failed (${res.status})`);
      }
      this.render();
    });
  }

  private adoptView(body: JsonValue): void {
    this.view = decodeSessionView(body);
    this.voi = null;
    this.recommendation = null;
    this.error = null;
  }

  private async startSession(modelId: string): Promise<void> {
    const res = await this.api.createSession(modelId);
    if (res.status !== 201 || res.body === null) {
      this.error = errorMessage(res.body, `session create failed (${res.status})`);
      this.render();
      return;
    }
    this.adoptView(res.body);
    this.hash.set(`#s=${this.view!.id}`);
    this.render();
  }

  onStartUpload(text: string): Promise<void> {
    return this.enqueue(async () => {
      const res = await this.api.uploadModel(text);
      if (res.status !== 201 || res.body === null) {
        this.error = uploadError(res);
        this.render();
        return;
      }
      const id = asString(asObject(res.body, "upload").id, "upload.id");
      await this.startSession(id);
    });
  }

  onStartExisting(modelId: string): Promise<void> {
    return this.enqueue(async () => {
      if (modelId === "") {
        this.error = "enter a model id";
        this.render();
        return;
      }
      await this.startSession(modelId);
    });
  }

  private async step(body: StepBody): Promise<void> {
    if (this.view === null) return;
    const res = await this.api.step(this.view.id, body);
    if (res.status === 200 && res.body !== null) {
      this.adoptView(res.body);
    } else {
      this.error = errorMessage(res.body, `step failed (${res.status})`);
    }
    this.render();
  }

  onObserve(variable: string, state: string): Promise<void> {
    return this.enqueue(() => this.step({ observe: { variable, state } }));
  }

  onDecide(decision: string, action: string): Promise<void> {
    return this.enqueue(() => this.step({ decide: { decision, action } }));
  }

  onVoi(): Promise<void> {
    return this.enqueue(async () => {
      if (this.view === null || this.view.pending === null) return;
      const voiRes = await this.api.voi(this.view.id, this.view.pending.name);
      if (voiRes.status !== 200 || voiRes.body === null) {
        this.error = errorMessage(voiRes.body, `voi failed (${voiRes.status})`);
        this.render();
        return;
      }
      const recRes = await this.api.recommendation(this.view.id);
      if (recRes.status !== 200 || recRes.body === null) {
        this.error = errorMessage(recRes.body, `recommendation failed (${recRes.status})`);
        this.render();
        return;
      }
      this.voi = decodeVoiReport(voiRes.body);
      this.recommendation = decodeRecommendation(recRes.body);
      this.error = null;
      this.render();
    });
  }

  onNewSession(): Promise<void> {
    return this.enqueue(async () => {
      this.view = null;
      this.voi = null;
      this.recommendation = null;
      this.error = null;
      this.hash.set("");
      this.render();
    });
  }
}
