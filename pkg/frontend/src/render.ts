/**
 * DOM rendering for the rating form. Rebuilds the view from state on each
 * call; all interaction flows through the handlers. The assignment payload
 * carries no class label, so none can appear in the DOM.
 */

import { canSubmit, allRated, ratedCount, RatingFormState } from "./state.js";
import { N_ACTIONS, Score, SCORE_VALUES } from "./types.js";

export interface Handlers {
  onScore(index: number, value: Score): void;
  onPlayed(): void;
  onAudioError(): void;
  onRetryAudio(): void;
  onSubmit(): void;
}

export function renderForm(
  root: HTMLElement,
  state: RatingFormState,
  handlers: Handlers,
): void {
  const doc = root.ownerDocument;
  // keep the live audio element across re-renders so rating an action never
  // interrupts playback; a failed element is always rebuilt to force a reload
  const previous = root.querySelector<HTMLAudioElement>("audio.clip-audio");
  const reusable =
    previous !== null &&
    !state.audioFailed &&
    previous.getAttribute("src") === state.assignment.audio_url
      ? previous
      : null;
  root.textContent = "";

  const prompt = doc.createElement("p");
  prompt.className = "prompt";
  prompt.textContent = state.assignment.prompt;
  root.appendChild(prompt);

  const audioBlock = doc.createElement("div");
  audioBlock.className = "audio-block";
  let audio: HTMLAudioElement;
  if (reusable) {
    audio = reusable;
  } else {
    audio = doc.createElement("audio");
    audio.className = "clip-audio";
    audio.controls = true;
    audio.src = state.assignment.audio_url;
    audio.addEventListener("ended", handlers.onPlayed);
    audio.addEventListener("error", handlers.onAudioError);
  }
  audioBlock.appendChild(audio);
  if (state.audioFailed) {
    const retry = doc.createElement("button");
    retry.className = "audio-retry";
    retry.textContent = "Audio failed to load - retry";
    retry.addEventListener("click", handlers.onRetryAudio);
    audioBlock.appendChild(retry);
  }
  if (!state.played) {
    const hint = doc.createElement("p");
    hint.className = "play-hint";
    hint.textContent = "Listen to the whole clip before rating.";
    audioBlock.appendChild(hint);
  }
  root.appendChild(audioBlock);

  const legend = doc.createElement("p");
  legend.className = "scale-legend";
  const low = state.assignment.anchors["0"] ?? "very unlikely";
  const high = state.assignment.anchors["4"] ?? "very likely";
  legend.textContent = `0 = ${low} ... 4 = ${high}`;
  root.appendChild(legend);

  const table = doc.createElement("div");
  table.className = "action-rows";
  state.assignment.actions.forEach((action, index) => {
    const row = doc.createElement("div");
    row.className = "action-row";
    const name = doc.createElement("span");
    name.className = "action-name";
    name.textContent = action;
    row.appendChild(name);
    for (const value of SCORE_VALUES) {
      const label = doc.createElement("label");
      label.className = "score-option";
      const input = doc.createElement("input");
      input.type = "radio";
      input.name = `action-${index}`;
      input.value = String(value);
      input.checked = state.scores[index] === value;
      input.addEventListener("change", () => handlers.onScore(index, value));
      label.appendChild(input);
      const caption = doc.createElement("span");
      caption.textContent = String(value);
      label.appendChild(caption);
      row.appendChild(label);
    }
    table.appendChild(row);
  });
  root.appendChild(table);

  const status = doc.createElement("p");
  status.className = "form-status";
  if (state.error) {
    status.classList.add("error");
    status.textContent = state.error;
  } else if (!state.played) {
    status.textContent = "Play the clip to enable submission.";
  } else if (!allRated(state)) {
    status.textContent = `${N_ACTIONS - ratedCount(state)} action(s) left to rate.`;
  } else {
    status.textContent = "Ready to submit.";
  }
  root.appendChild(status);

  const submit = doc.createElement("button");
  submit.className = "submit-button";
  submit.textContent = state.submitting ? "Submitting..." : "Submit ratings";
  submit.disabled = !canSubmit(state);
  submit.addEventListener("click", handlers.onSubmit);
  root.appendChild(submit);
}

export function renderDone(root: HTMLElement): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const done = doc.createElement("p");
  done.className = "done-screen";
  done.textContent = "All done - there are no more clips for you to rate. Thank you!";
  root.appendChild(done);
}

export function renderFatal(root: HTMLElement, message: string, onRetry: () => void): void {
  const doc = root.ownerDocument;
  root.textContent = "";
  const error = doc.createElement("p");
  error.className = "fatal-error";
  error.textContent = message;
  root.appendChild(error);
  const retry = doc.createElement("button");
  retry.className = "fatal-retry";
  retry.textContent = "Retry";
  retry.addEventListener("click", onRetry);
  root.appendChild(retry);
}
