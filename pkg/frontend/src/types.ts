/** Wire types for the annotation service API. */

export interface Assignment {
  done: false;
  clip_id: string;
  audio_url: string;
  actions: string[];
  prompt: string;
  anchors: Record<string, string>;
}

export interface DoneSignal {
  done: true;
}

export type NextResponse = Assignment | DoneSignal;

export interface SubmissionBody {
  session: string;
  clip_id: string;
  scores: number[];
}

export interface SubmitAck {
  ok: boolean;
  clip_id: string;
  received: number[];
  duplicate: boolean;
}

export type SubmitResult =
  | { status: "ok"; ack: SubmitAck }
  | { status: "conflict"; detail: string }
  | { status: "invalid"; detail: string };

export type Score = 0 | 1 | 2 | 3 | 4;

export const N_ACTIONS = 20;
export const SCORE_VALUES: Score[] = [0, 1, 2, 3, 4];
