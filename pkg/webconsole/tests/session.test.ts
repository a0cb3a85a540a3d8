import { describe, expect, test } from "vitest";

import { ConsoleSession } from "../src/session.js";
import type { PipelineEvent } from "../src/types.js";

const detected = (at: number): PipelineEvent => ({
  kind: "FaceDetected",
  at,
  box: { x: 1, y: 2, w: 3, h: 4 },
});

describe("event log", () => {
  test("appends in order", () => {
    const session = new ConsoleSession("http://x");
    session.appendEvents([detected(1), detected(2), detected(3)]);
    expect(session.eventLog.map((e) => e.at)).toEqual([1, 2, 3]);
  });

  test("deduplicates events arriving via both frame response and feed", () => {
    const session = new ConsoleSession("http://x");
    const fromFrame = session.appendEvents([detected(5)]);
    const fromFeed = session.appendEvents([detected(5)]);
    expect(fromFrame).toHaveLength(1);
    expect(fromFeed).toHaveLength(0);
    expect(session.eventLog).toHaveLength(1);
  });

  test("mode follows StateChanged events", () => {
    const session = new ConsoleSession("http://x");
    session.appendEvents([{ kind: "StateChanged", at: 1, from: "offline", to: "online" }]);
    expect(session.mode).toBe("online");
  });
});

describe("pending enrolment invariant", () => {
  test("capture only pends while enrolling", () => {
    const session = new ConsoleSession("http://x");
    session.appendEvents([
      { kind: "EnrolmentCaptured", at: 1, tempImageRef: "a.pgm" },
    ]);
    expect(session.pendingEnrolment).toBeNull();

    session.appendEvents([{ kind: "StateChanged", at: 2, from: "offline", to: "enrolment" }]);
    session.appendEvents([{ kind: "EnrolmentCaptured", at: 3, tempImageRef: "b.pgm" }]);
    expect(session.pendingEnrolment).toBe("b.pgm");
  });

  test("leaving enrolment clears the pending capture", () => {
    const session = new ConsoleSession("http://x");
    session.noteMode("enrolment");
    session.appendEvents([{ kind: "EnrolmentCaptured", at: 1, tempImageRef: "b.pgm" }]);
    session.appendEvents([{ kind: "StateChanged", at: 2, from: "enrolment", to: "offline" }]);
    expect(session.pendingEnrolment).toBeNull();
  });
});

describe("frame concurrency", () => {
  test("drops captures while one is in flight", () => {
    const session = new ConsoleSession("http://x");
    expect(session.beginFrame()).toBe(true);
    expect(session.beginFrame()).toBe(false); // drop-newest while busy
    session.endFrame();
    expect(session.beginFrame()).toBe(true);
  });
});
