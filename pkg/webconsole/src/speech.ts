// Spoken and textual feedback derived from pipeline events.

import type { PipelineEvent } from "./types.js";

export interface Speaker {
  speak(text: string): void;
}

/** Text for the visual log; every event kind gets a line. */
export function formatLogLine(event: PipelineEvent): string {
  switch (event.kind) {
    case "FaceDetected":
      return event.box
        ? `Face detected at (${event.box.x}, ${event.box.y}) size ${event.box.w}x${event.box.h}`
        : "Face detected";
    case "PersonIdentified":
      return `Identified ${event.displayName ?? event.personId ?? "someone"}` +
        (event.via ? ` (${event.via})` : "");
    case "UnknownPerson":
      return "Unknown person";
    case "EnrolmentCaptured":
      return "Face captured for enrolment";
    case "StateChanged":
      return `State: ${event.from} → ${event.to}`;
    case "Error":
      return `Error: ${event.message ?? "unknown"}`;
  }
}

/** Spoken text, or null for event kinds that stay silent. */
export function describeEvent(event: PipelineEvent): string | null {
  switch (event.kind) {
    case "PersonIdentified":
      return `Identified ${event.displayName ?? "someone"}`;
    case "UnknownPerson":
      return "Unknown person";
    case "StateChanged":
      return event.from === event.to ? null : `Now ${event.to}`;
    default:
      return null;
  }
}

export class FeedbackSpeaker {
  muted = false;
  private speaker: Speaker;

  constructor(speaker: Speaker) {
    this.speaker = speaker;
  }

  /** Speak the event when appropriate; returns the spoken text, if any. */
  handle(event: PipelineEvent): string | null {
    const text = describeEvent(event);
    if (text !== null && !this.muted) {
      this.speaker.speak(text);
    }
    return text;
  }
}

/** Default speaker backed by the browser speech synthesis interface. */
export function platformSpeaker(): Speaker {
  if (typeof speechSynthesis === "undefined") {
    return { speak: () => undefined };
  }
  return {
    speak: (text) => speechSynthesis.speak(new SpeechSynthesisUtterance(text)),
  };
}
