/**
 * Thin typed client for the annotation service.
 *
 * Network failures (fetch rejections) propagate to the caller, which keeps
 * the form state and retries; HTTP 409/422 are returned as structured
 * results so the UI can show a resolution message instead of losing work.
 */

import { NextResponse, SubmissionBody, SubmitAck, SubmitResult } from "./types.js";

type FetchLike = typeof fetch;

async function detailOf(response: Response): Promise<string> {
  try {
    const body = await response.json();
    return typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
  } catch {
    return response.statusText;
  }
}

export class ApiClient {
  constructor(
    private readonly campaignId: string,
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}/api/campaign/${encodeURIComponent(this.campaignId)}${path}`;
  }

  async next(session: string): Promise<NextResponse> {
    const response = await this.fetchFn(
      this.url(`/next?session=${encodeURIComponent(session)}`),
    );
    if (!response.ok) {
      throw new Error(`next failed: ${response.status} ${await detailOf(response)}`);
    }
    return (await response.json()) as NextResponse;
  }

  async submit(body: SubmissionBody): Promise<SubmitResult> {
    const response = await this.fetchFn(this.url("/submit"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (response.ok) {
      return { status: "ok", ack: (await response.json()) as SubmitAck };
    }
    if (response.status === 409) {
      return { status: "conflict", detail: await detailOf(response) };
    }
    if (response.status === 422) {
      return { status: "invalid", detail: await detailOf(response) };
    }
    throw new Error(`submit failed: ${response.status} ${await detailOf(response)}`);
  }

  async registerSession(session: string, checklist: Record<string, boolean>): Promise<void> {
    const response = await this.fetchFn(this.url("/session"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ session, checklist }),
    });
    if (!response.ok) {
      throw new Error(`session registration failed: ${response.status}`);
    }
  }
}
