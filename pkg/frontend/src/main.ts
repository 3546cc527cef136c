/**
 * App bootstrap: one annotator session per tab, optimistic submit with
 * idempotent retry on network failure, conflict surfaced with a way forward.
 */

import { ApiClient } from "./api.js";
import {
  buildSubmission,
  canSubmit,
  markAudioFailed,
  markError,
  markPlayed,
  markSubmitting,
  newForm,
  RatingFormState,
  setScore,
} from "./state.js";
import { renderDone, renderFatal, renderForm } from "./render.js";
import { Assignment, Score } from "./types.js";

const RETRY_DELAY_MS = 2000;

function sessionToken(): string {
  const key = "avsec-session";
  let token = window.localStorage.getItem(key);
  if (!token) {
    token = crypto.randomUUID();
    window.localStorage.setItem(key, token);
  }
  return token;
}

function campaignId(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("campaign") ?? "default";
}

export class App {
  private state: RatingFormState | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly session: string,
  ) {}

  async start(): Promise<void> {
    try {
      await this.api.registerSession(this.session, { self_reported: true });
    } catch {
      // profile recording is best-effort; rating can proceed without it
    }
    await this.advance();
  }

  private async advance(): Promise<void> {
    let next;
    try {
      next = await this.api.next(this.session);
    } catch (error) {
      renderFatal(this.root, `Could not reach the service: ${error}`, () => {
        void this.advance();
      });
      return;
    }
    if (next.done) {
      renderDone(this.root);
      return;
    }
    this.state = newForm(next as Assignment);
    this.redraw();
  }

  private redraw(): void {
    if (!this.state) return;
    renderForm(this.root, this.state, {
      onScore: (index: number, value: Score) => {
        if (!this.state) return;
        this.state = setScore(this.state, index, value);
        this.redraw();
      },
      onPlayed: () => {
        if (!this.state) return;
        this.state = markPlayed(this.state);
        this.redraw();
      },
      onAudioError: () => {
        if (!this.state) return;
        this.state = markAudioFailed(this.state);
        this.redraw();
      },
      onRetryAudio: () => this.redraw(),
      onSubmit: () => void this.submit(),
    });
  }

  private async submit(): Promise<void> {
    if (!this.state || !canSubmit(this.state)) return;
    const body = buildSubmission(this.state, this.session);
    this.state = markSubmitting(this.state);
    this.redraw();
    let result;
    try {
      result = await this.api.submit(body);
    } catch {
      // network failure: keep the filled form and retry the identical,
      // idempotent submission shortly
      this.state = markError(this.state, "Network problem - retrying shortly...");
      this.redraw();
      window.setTimeout(() => void this.submit(), RETRY_DELAY_MS);
      return;
    }
    if (result.status === "ok") {
      this.state = null;
      await this.advance();
      return;
    }
    if (result.status === "conflict") {
      this.state = markError(
        this.state,
        `This clip was already rated (${result.detail}). Moving to the next clip...`,
      );
      this.redraw();
      window.setTimeout(() => void this.advance(), RETRY_DELAY_MS);
      return;
    }
    this.state = markError(this.state, `Rejected: ${result.detail}`);
    this.redraw();
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const api = new ApiClient(campaignId());
  const app = new App(root, api, sessionToken());
  void app.start();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
