// Wire types shared with the support server's /api/v1 endpoints.

export type Mode = "offline" | "online" | "enrolment";

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export type EventKind =
  | "FaceDetected"
  | "PersonIdentified"
  | "UnknownPerson"
  | "EnrolmentCaptured"
  | "StateChanged"
  | "Error";

export interface PipelineEvent {
  kind: EventKind;
  at: number; // ms since epoch, server clock
  box?: Box;
  personId?: string;
  displayName?: string;
  distance?: number | null;
  via?: "local" | "server";
  tempImageRef?: string;
  from?: Mode;
  to?: Mode;
  message?: string;
}

export interface ApiImage {
  encoding: "pgm+base64";
  data: string;
}
