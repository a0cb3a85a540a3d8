// Client-side frame encoding: RGBA pixels to grayscale binary PGM, base64.

import type { ApiImage } from "./types.js";

export const MAX_FRAME_WIDTH = 1280;
export const MAX_FRAME_HEIGHT = 720;

/** Target size fitting within the frame budget, aspect ratio preserved. */
export function fitWithin(
  width: number,
  height: number,
  maxW: number = MAX_FRAME_WIDTH,
  maxH: number = MAX_FRAME_HEIGHT,
): { width: number; height: number } {
  const scale = Math.min(maxW / width, maxH / height, 1);
  return {
    width: Math.max(1, Math.round(width * scale)),
    height: Math.max(1, Math.round(height * scale)),
  };
}

/** ITU-R 601 luma per pixel, rounded half-up like the server. */
export function rgbaToGray(data: Uint8ClampedArray | Uint8Array, width: number, height: number): Uint8Array {
  const out = new Uint8Array(width * height);
  for (let i = 0; i < out.length; i++) {
    const o = i * 4;
    out[i] = Math.min(
      255,
      Math.round(0.299 * data[o] + 0.587 * data[o + 1] + 0.114 * data[o + 2]),
    );
  }
  return out;
}

/** Binary PGM: "P5\n<w> <h>\n255\n" followed by the raw bytes. */
export function encodePgm(width: number, height: number, gray: Uint8Array): Uint8Array {
  if (gray.length !== width * height) {
    throw new Error(`expected ${width * height} pixels, got ${gray.length}`);
  }
  const header = new TextEncoder().encode(`P5\n${width} ${height}\n255\n`);
  const out = new Uint8Array(header.length + gray.length);
  out.set(header, 0);
  out.set(gray, header.length);
  return out;
}

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}

export function grayFrameToApiImage(width: number, height: number, gray: Uint8Array): ApiImage {
  return { encoding: "pgm+base64", data: bytesToBase64(encodePgm(width, height, gray)) };
}
