// DOM wiring for the operator console: camera capture, overlay, mode
// control, enrolment form, event log and spoken feedback.

import { ConsoleApi } from "./api.js";
import { submitEnrolment } from "./enrolment.js";
import { boxesFromEvents, drawBoxes } from "./overlay.js";
import { fitWithin, grayFrameToApiImage, rgbaToGray } from "./pgm.js";
import { ConsoleSession } from "./session.js";
import { FeedbackSpeaker, formatLogLine, platformSpeaker } from "./speech.js";
import { EventFeed } from "./sse.js";
import type { Mode, PipelineEvent } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const serverUrl = new URLSearchParams(location.search).get("server") ?? location.origin;
const api = new ConsoleApi(serverUrl);
const session = new ConsoleSession(serverUrl);
const speaker = new FeedbackSpeaker(platformSpeaker());

const video = el<HTMLVideoElement>("camera");
const overlay = el<HTMLCanvasElement>("overlay");
const logList = el<HTMLUListElement>("event-log");
const statusLine = el<HTMLParagraphElement>("status");
const enrolError = el<HTMLParagraphElement>("enrol-error");

function logLine(text: string, cls = ""): void {
  const item = document.createElement("li");
  item.textContent = text;
  if (cls) {
    item.className = cls;
  }
  logList.appendChild(item);
  logList.scrollTop = logList.scrollHeight;
}

function ingest(events: PipelineEvent[]): PipelineEvent[] {
  const fresh = session.appendEvents(events);
  for (const event of fresh) {
    logLine(formatLogLine(event), event.kind);
    speaker.handle(event);
  }
  el<HTMLSpanElement>("mode-indicator").textContent = session.mode;
  return fresh;
}

function clientError(message: string): void {
  ingest([{ kind: "Error", at: Date.now(), message }]);
}

async function startCamera(): Promise<void> {
  try {
    const stream = await navigator.mediaDevices.getUserMedia({
      video: { width: { ideal: 1280 }, height: { ideal: 720 } },
    });
    video.srcObject = stream;
    await video.play();
    statusLine.textContent = "Camera running.";
  } catch (err) {
    statusLine.textContent = `Camera unavailable (${err}); use a file instead.`;
  }
}

function frameSource(): { source: CanvasImageSource; width: number; height: number } | null {
  if (video.videoWidth > 0) {
    return { source: video, width: video.videoWidth, height: video.videoHeight };
  }
  if (loadedImage) {
    return { source: loadedImage, width: loadedImage.width, height: loadedImage.height };
  }
  return null;
}

async function captureAndSend(): Promise<void> {
  const frame = frameSource();
  if (!frame) {
    clientError("No camera stream or loaded image to capture");
    return;
  }
  if (!session.beginFrame()) {
    statusLine.textContent = "Previous frame still in flight; capture dropped.";
    return;
  }
  try {
    const { width, height } = fitWithin(frame.width, frame.height);
    const scratch = document.createElement("canvas");
    scratch.width = width;
    scratch.height = height;
    const ctx = scratch.getContext("2d");
    if (!ctx) {
      throw new Error("2d canvas unsupported");
    }
    ctx.drawImage(frame.source, 0, 0, width, height);
    const gray = rgbaToGray(ctx.getImageData(0, 0, width, height).data, width, height);
    const image = grayFrameToApiImage(width, height, gray);

    overlay.width = width;
    overlay.height = height;
    const view = overlay.getContext("2d");
    if (view) {
      view.drawImage(frame.source, 0, 0, width, height);
    }

    const events = await api.postFrame(image);
    ingest(events);
    if (view) {
      const boxes = boxesFromEvents(events);
      drawBoxes(view, width, height, boxes);
      statusLine.textContent = boxes.length
        ? `Detected ${boxes.length} face(s).`
        : "No face in frame.";
    }
  } catch (err) {
    clientError(`Frame post failed: ${err}`);
  } finally {
    session.endFrame();
  }
}

let loadedImage: HTMLImageElement | null = null;

function wireControls(): void {
  el<HTMLButtonElement>("capture").addEventListener("click", () => void captureAndSend());
  el<HTMLButtonElement>("start-camera").addEventListener("click", () => void startCamera());

  el<HTMLInputElement>("file-input").addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) {
      return;
    }
    const img = new Image();
    img.onload = () => {
      loadedImage = img;
      statusLine.textContent = `Loaded ${file.name} (${img.width}x${img.height}).`;
    };
    img.src = URL.createObjectURL(file);
  });

  for (const mode of ["offline", "online", "enrolment"] as Mode[]) {
    el<HTMLButtonElement>(`mode-${mode}`).addEventListener("click", async () => {
      try {
        ingest([await api.setMode(mode)]);
      } catch (err) {
        clientError(`Mode change failed: ${err}`);
      }
    });
  }

  el<HTMLFormElement>("enrol-form").addEventListener("submit", async (event) => {
    event.preventDefault();
    const name = el<HTMLInputElement>("enrol-name").value;
    const notes = el<HTMLInputElement>("enrol-notes").value;
    const outcome = await submitEnrolment(api, session, name, notes);
    if (outcome.ok) {
      enrolError.textContent = "";
      statusLine.textContent = outcome.confirmation ?? "Enrolled.";
      if (outcome.confirmation && !speaker.muted) {
        platformSpeaker().speak(outcome.confirmation);
      }
      el<HTMLInputElement>("enrol-name").value = "";
      el<HTMLInputElement>("enrol-notes").value = "";
    } else {
      enrolError.textContent = outcome.error ?? "Enrolment failed";
    }
  });

  el<HTMLInputElement>("mute").addEventListener("change", (event) => {
    speaker.muted = (event.target as HTMLInputElement).checked;
  });
}

async function start(): Promise<void> {
  wireControls();
  statusLine.textContent = (await api.health())
    ? `Connected to ${serverUrl}.`
    : `Server ${serverUrl} unreachable.`;
  try {
    session.noteMode(await api.getMode());
    el<HTMLSpanElement>("mode-indicator").textContent = session.mode;
  } catch {
    // surfaced by the health line already
  }
  const feed = new EventFeed(
    api.eventsUrl(),
    (event) => void ingest([event]),
    (notice) => logLine(notice, "notice"),
  );
  feed.connect();
}

void start();
