// Bounding-box overlay drawing, decoupled from the DOM for testability.

import type { Box } from "./types.js";

export interface BoxCanvas {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  strokeRect(x: number, y: number, w: number, h: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

/** Draw detection boxes; scale maps frame coordinates to canvas pixels. */
export function drawBoxes(
  ctx: BoxCanvas,
  width: number,
  height: number,
  boxes: Box[],
  scaleX = 1,
  scaleY = 1,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#ffd400";
  ctx.lineWidth = 3;
  for (const box of boxes) {
    ctx.strokeRect(box.x * scaleX, box.y * scaleY, box.w * scaleX, box.h * scaleY);
  }
}

export function boxesFromEvents(events: { kind: string; box?: Box }[]): Box[] {
  return events.filter((e) => e.kind === "FaceDetected" && e.box).map((e) => e.box as Box);
}
