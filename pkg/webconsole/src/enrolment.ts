// Enrolment form flow: validate locally, complete on the server.

import { ApiError, ConsoleApi } from "./api.js";
import { ConsoleSession } from "./session.js";

export interface EnrolmentOutcome {
  ok: boolean;
  error?: string;
  confirmation?: string;
}

/** Submit the pending capture with the entered details.
 *
 * An empty name never reaches the server (inline validation); a 409 from
 * the server (mode changed under us) is surfaced verbatim.
 */
export async function submitEnrolment(
  api: ConsoleApi,
  session: ConsoleSession,
  displayName: string,
  notes: string,
): Promise<EnrolmentOutcome> {
  const name = displayName.trim();
  if (!name) {
    return { ok: false, error: "Name is required" };
  }
  if (!session.pendingEnrolment) {
    return { ok: false, error: "No pending capture to enrol" };
  }
  try {
    const event = await api.completeEnrolment(session.pendingEnrolment, name, notes);
    session.appendEvents([event]);
    if (event.kind === "Error") {
      return { ok: false, error: event.message ?? "enrolment failed" };
    }
    session.clearPending();
    return { ok: true, confirmation: `Enrolled ${name}` };
  } catch (err) {
    if (err instanceof ApiError) {
      return { ok: false, error: `${err.status}: ${err.message}` };
    }
    return { ok: false, error: String(err) };
  }
}
