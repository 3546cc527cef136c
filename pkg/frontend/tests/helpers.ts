import { Assignment } from "../src/types.js";

export const ACTIONS = [
  "dripping", "splashing", "pouring", "breaking", "calling",
  "rolling", "scraping", "exhaling", "vibrating", "ringing",
  "groaning", "gasping", "singing", "tapping", "wailing",
  "crumpling", "blowing", "exploding", "rotating", "sizzling",
];

export const PROMPT =
  "For each action below, judge how likely it is to have produced at least part of the sound event.";

export function makeAssignment(clipId = "1-10000-A-0.wav"): Assignment {
  return {
    done: false,
    clip_id: clipId,
    audio_url: `/api/clip/${clipId}/audio`,
    actions: [...ACTIONS],
    prompt: PROMPT,
    anchors: { "0": "very unlikely", "4": "very likely" },
  };
}
