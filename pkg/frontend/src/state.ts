/**
 * Pure rating-form state machine.
 *
 * The submit gate is the core contract: a submission can only be built when
 * the audio has been played at least once and every one of the 20 actions
 * has a score. buildSubmission always emits exactly 20 values.
 */

import { Assignment, N_ACTIONS, Score, SubmissionBody } from "./types.js";

export interface RatingFormState {
  assignment: Assignment;
  scores: (Score | null)[];
  played: boolean;
  submitting: boolean;
  audioFailed: boolean;
  error: string | null;
}

export function newForm(assignment: Assignment): RatingFormState {
  if (assignment.actions.length !== N_ACTIONS) {
    throw new Error(
      `assignment must carry ${N_ACTIONS} actions, got ${assignment.actions.length}`,
    );
  }
  return {
    assignment,
    scores: new Array(N_ACTIONS).fill(null),
    played: false,
    submitting: false,
    audioFailed: false,
    error: null,
  };
}

export function setScore(
  state: RatingFormState,
  index: number,
  value: Score,
): RatingFormState {
  if (index < 0 || index >= N_ACTIONS || !Number.isInteger(index)) {
    throw new Error(`action index ${index} out of range`);
  }
  if (![0, 1, 2, 3, 4].includes(value)) {
    throw new Error(`score ${value} not in 0..4`);
  }
  const scores = state.scores.slice();
  scores[index] = value;
  return { ...state, scores, error: null };
}

export function markPlayed(state: RatingFormState): RatingFormState {
  return { ...state, played: true, audioFailed: false };
}

export function markAudioFailed(state: RatingFormState): RatingFormState {
  return { ...state, audioFailed: true };
}

export function markSubmitting(state: RatingFormState): RatingFormState {
  return { ...state, submitting: true, error: null };
}

export function markError(state: RatingFormState, message: string): RatingFormState {
  return { ...state, submitting: false, error: message };
}

export function ratedCount(state: RatingFormState): number {
  return state.scores.filter((s) => s !== null).length;
}

export function allRated(state: RatingFormState): boolean {
  return ratedCount(state) === N_ACTIONS;
}

export function canSubmit(state: RatingFormState): boolean {
  return state.played && allRated(state) && !state.submitting;
}

/** The exact POST body; throws if the form is not submit-eligible. */
export function buildSubmission(
  state: RatingFormState,
  session: string,
): SubmissionBody {
  if (!state.played) {
    throw new Error("cannot submit before the clip has been played");
  }
  if (!allRated(state)) {
    throw new Error(
      `cannot submit with ${N_ACTIONS - ratedCount(state)} unrated action(s)`,
    );
  }
  const scores = state.scores.map((s) => {
    if (s === null) throw new Error("unrated action slipped through");
    return s;
  });
  if (scores.length !== N_ACTIONS) {
    throw new Error("submission must carry exactly 20 scores");
  }
  return { session, clip_id: state.assignment.clip_id, scores };
}
