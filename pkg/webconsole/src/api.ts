// Thin fetch client for the support server's /api/v1 endpoints.

import type { ApiImage, Box, Mode, PipelineEvent } from "./types.js";

export class ApiError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorMessage(response: Response): Promise<string> {
  try {
    const body = await response.json();
    return body.error ?? body.message ?? response.statusText;
  } catch {
    return response.statusText;
  }
}

export class ConsoleApi {
  private base: string;
  private fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async post(path: string, body: unknown): Promise<Response> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await errorMessage(response));
    }
    return response;
  }

  async postFrame(image: ApiImage): Promise<PipelineEvent[]> {
    return (await this.post("/api/v1/frame", { image })).json();
  }

  async detect(image: ApiImage): Promise<Box[]> {
    const body = await (await this.post("/api/v1/detect", { image })).json();
    return body.boxes;
  }

  async getMode(): Promise<Mode> {
    const response = await this.fetchFn(`${this.base}/api/v1/state`);
    if (!response.ok) {
      throw new ApiError(response.status, await errorMessage(response));
    }
    return (await response.json()).mode;
  }

  async setMode(mode: Mode): Promise<PipelineEvent> {
    return (await this.post("/api/v1/state", { mode })).json();
  }

  async completeEnrolment(
    tempRef: string,
    displayName: string,
    notes: string,
  ): Promise<PipelineEvent> {
    return (
      await this.post("/api/v1/enrolment/complete", { tempRef, displayName, notes })
    ).json();
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchFn(`${this.base}/health`);
      return response.ok;
    } catch {
      return false;
    }
  }

  eventsUrl(): string {
    return `${this.base}/api/v1/events`;
  }
}
