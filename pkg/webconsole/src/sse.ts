// Server-sent event subscription with automatic reconnection.

import type { PipelineEvent } from "./types.js";

export interface EventSourceLike {
  onmessage: ((event: { data: string }) => void) | null;
  onerror: (() => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;
type Scheduler = (fn: () => void, ms: number) => unknown;

export class EventFeed {
  private url: string;
  private onEvent: (event: PipelineEvent) => void;
  private onNotice: (text: string) => void;
  private factory: EventSourceFactory;
  private scheduler: Scheduler;
  private reconnectMs: number;
  private source: EventSourceLike | null = null;
  private stopped = false;

  constructor(
    url: string,
    onEvent: (event: PipelineEvent) => void,
    onNotice: (text: string) => void,
    factory?: EventSourceFactory,
    reconnectMs = 2000,
    scheduler: Scheduler = (fn, ms) => setTimeout(fn, ms),
  ) {
    this.url = url;
    this.onEvent = onEvent;
    this.onNotice = onNotice;
    this.factory = factory ?? ((u) => new EventSource(u) as EventSourceLike);
    this.reconnectMs = reconnectMs;
    this.scheduler = scheduler;
  }

  connect(): void {
    this.stopped = false;
    this.open();
  }

  private open(): void {
    this.source = this.factory(this.url);
    this.source.onmessage = (message) => {
      try {
        this.onEvent(JSON.parse(message.data));
      } catch {
        this.onNotice("Dropped an unparseable event");
      }
    };
    this.source.onerror = () => {
      if (this.stopped) {
        return;
      }
      this.source?.close();
      this.source = null;
      this.onNotice("Event stream disconnected; reconnecting");
      this.scheduler(() => {
        if (!this.stopped) {
          this.open();
        }
      }, this.reconnectMs);
    };
  }

  close(): void {
    this.stopped = true;
    this.source?.close();
    this.source = null;
  }
}
