// Console session state: the event log mirror, mode, and pending enrolment.
//
// The log can be fed from both the /frame responses and the server-sent
// event stream; identical events are deduplicated so the log always equals
// the server's event order.  No image data is ever stored here: captures
// are encoded, posted and dropped.

import type { Mode, PipelineEvent } from "./types.js";

function eventKey(event: PipelineEvent): string {
  return JSON.stringify([
    event.kind,
    event.at,
    event.box ?? null,
    event.personId ?? null,
    event.displayName ?? null,
    event.distance ?? null,
    event.via ?? null,
    event.tempImageRef ?? null,
    event.from ?? null,
    event.to ?? null,
    event.message ?? null,
  ]);
}

export class ConsoleSession {
  readonly serverUrl: string;
  mode: Mode = "offline";
  eventLog: PipelineEvent[] = [];
  pendingEnrolment: string | null = null;

  private seen = new Set<string>();
  private frameInFlight = false;

  constructor(serverUrl: string) {
    this.serverUrl = serverUrl;
  }

  /** Append events in order, skipping ones already logged. Returns the
   * newly appended events. */
  appendEvents(events: PipelineEvent[]): PipelineEvent[] {
    const fresh: PipelineEvent[] = [];
    for (const event of events) {
      const key = eventKey(event);
      if (this.seen.has(key)) {
        continue;
      }
      this.seen.add(key);
      this.eventLog.push(event);
      fresh.push(event);
      this.applyEvent(event);
    }
    return fresh;
  }

  private applyEvent(event: PipelineEvent): void {
    if (event.kind === "StateChanged" && event.to) {
      this.noteMode(event.to);
    } else if (event.kind === "EnrolmentCaptured" && event.tempImageRef) {
      if (this.mode === "enrolment") {
        this.pendingEnrolment = event.tempImageRef;
      }
    }
  }

  noteMode(mode: Mode): void {
    this.mode = mode;
    if (mode !== "enrolment") {
      this.pendingEnrolment = null; // invariant: pending only while enrolling
    }
  }

  clearPending(): void {
    this.pendingEnrolment = null;
  }

  /** One frame post at a time; a capture while busy is dropped. */
  beginFrame(): boolean {
    if (this.frameInFlight) {
      return false;
    }
    this.frameInFlight = true;
    return true;
  }

  endFrame(): void {
    this.frameInFlight = false;
  }

  get busy(): boolean {
    return this.frameInFlight;
  }
}
