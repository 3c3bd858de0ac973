/**
 * Wire protocol shared with the simulation server.  One JSON message per
 * WebSocket text frame; the console consumes exactly these shapes and
 * sends only operator_decision messages.
 */

export type Phase =
  | "Find"
  | "Fix"
  | "Track"
  | "Target"
  | "Engage"
  | "Assess"
  | "Aborted"
  | "Disintegrated"
  | "AwaitingOperator";

/** Evidence summary as emitted by the server; displayed verbatim. */
export type Evidence = Record<string, unknown>;

export interface AbortRequest {
  type: "abort_request";
  engagement_id: string;
  sim_time: number;
  evidence: Evidence;
  timeout_s: number;
}

export interface Ack {
  type: "ack";
  engagement_id: string;
  applied: boolean;
  reason?: string;
}

export interface StateUpdate {
  type: "state_update";
  engagement_id: string;
  phase: Phase;
  sim_time?: number;
}

export interface ErrorFrame {
  type: "error";
  reason: string;
}

export type ServerMessage = AbortRequest | Ack | StateUpdate | ErrorFrame;

export interface OperatorDecisionMessage {
  type: "operator_decision";
  engagement_id: string;
  decision: "abort" | "proceed";
  operator_id: string;
}

export class ProtocolError extends Error {}

function need(cond: boolean, what: string): asserts cond {
  if (!cond) throw new ProtocolError(`malformed server message: ${what}`);
}

/** Parse and validate one raw frame from the server. */
export function parseServerMessage(raw: string): ServerMessage {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    throw new ProtocolError("frame is not valid JSON");
  }
  need(typeof parsed === "object" && parsed !== null, "not an object");
  const msg = parsed as Record<string, unknown>;
  switch (msg.type) {
    case "abort_request":
      need(typeof msg.engagement_id === "string", "abort_request.engagement_id");
      need(typeof msg.sim_time === "number", "abort_request.sim_time");
      need(typeof msg.timeout_s === "number", "abort_request.timeout_s");
      need(typeof msg.evidence === "object" && msg.evidence !== null, "abort_request.evidence");
      return msg as unknown as AbortRequest;
    case "ack":
      need(typeof msg.engagement_id === "string", "ack.engagement_id");
      need(typeof msg.applied === "boolean", "ack.applied");
      return msg as unknown as Ack;
    case "state_update":
      need(typeof msg.engagement_id === "string", "state_update.engagement_id");
      need(typeof msg.phase === "string", "state_update.phase");
      return msg as unknown as StateUpdate;
    case "error":
      need(typeof msg.reason === "string", "error.reason");
      return msg as unknown as ErrorFrame;
    default:
      throw new ProtocolError(`unknown message type ${String(msg.type)}`);
  }
}
