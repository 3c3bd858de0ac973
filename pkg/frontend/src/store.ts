/**
 * Console state: the pending abort-request queue, engagement phases, the
 * simulation clock, and the at-most-once decision guard.
 *
 * Time is simulation time as reported by server messages, never the wall
 * clock, so countdowns stay honest to the simulation: they advance only
 * when the server says time passed.
 */

import {
  Evidence,
  OperatorDecisionMessage,
  Phase,
  ServerMessage,
} from "./protocol.js";

export interface PendingRequest {
  engagementId: string;
  simTime: number;
  evidence: Evidence;
  timeoutS: number;
  /** sim-time instant at which the fail-safe fires */
  deadline: number;
}

export interface Notice {
  kind: "info" | "warning" | "error";
  text: string;
}

export class ConsoleStore {
  readonly pending = new Map<string, PendingRequest>();
  readonly phases = new Map<string, Phase>();
  readonly notices: Notice[] = [];
  latestSimTime = 0;
  connected = false;
  private sentThisSession = new Set<string>();

  /** New connection established; the server snapshot repopulates state. */
  startSession(): void {
    this.connected = true;
    this.pending.clear();
    this.phases.clear();
    this.sentThisSession.clear();
  }

  endSession(): void {
    this.connected = false;
  }

  handleMessage(msg: ServerMessage): void {
    switch (msg.type) {
      case "abort_request": {
        this.observeClock(msg.sim_time);
        // one card per engagement id: a re-request replaces the card
        this.pending.set(msg.engagement_id, {
          engagementId: msg.engagement_id,
          simTime: msg.sim_time,
          evidence: msg.evidence,
          timeoutS: msg.timeout_s,
          deadline: msg.sim_time + msg.timeout_s,
        });
        break;
      }
      case "state_update": {
        if (typeof msg.sim_time === "number") this.observeClock(msg.sim_time);
        this.phases.set(msg.engagement_id, msg.phase);
        if (msg.phase !== "AwaitingOperator") {
          this.pending.delete(msg.engagement_id);
        }
        break;
      }
      case "ack": {
        if (msg.applied) {
          this.pending.delete(msg.engagement_id);
          this.notices.push({
            kind: "info",
            text: `decision applied for ${msg.engagement_id}`,
          });
        } else {
          this.notices.push({
            kind: "warning",
            text: `decision rejected for ${msg.engagement_id}: ${msg.reason ?? "unknown"}`,
          });
        }
        break;
      }
      case "error": {
        this.notices.push({ kind: "error", text: `server error: ${msg.reason}` });
        break;
      }
    }
  }

  private observeClock(simTime: number): void {
    if (simTime > this.latestSimTime) this.latestSimTime = simTime;
    // cards past their deadline are gone, the fail-safe already fired
    for (const [eid, req] of [...this.pending]) {
      if (req.deadline <= this.latestSimTime) this.pending.delete(eid);
    }
  }

  /** Pending cards, soonest deadline first. */
  queue(): PendingRequest[] {
    return [...this.pending.values()].sort(
      (a, b) => a.deadline - b.deadline || a.engagementId.localeCompare(b.engagementId),
    );
  }

  remainingSeconds(req: PendingRequest): number {
    return Math.max(0, req.deadline - this.latestSimTime);
  }

  hasDecided(engagementId: string): boolean {
    return this.sentThisSession.has(engagementId);
  }

  /**
   * Build the decision message, enforcing at most one decision per
   * engagement per session.  Returns null when the request is no longer
   * pending or a decision was already sent.
   */
  submitDecision(
    engagementId: string,
    decision: "abort" | "proceed",
    operatorId: string,
  ): OperatorDecisionMessage | null {
    if (!this.pending.has(engagementId)) return null;
    if (this.sentThisSession.has(engagementId)) return null;
    this.sentThisSession.add(engagementId);
    return {
      type: "operator_decision",
      engagement_id: engagementId,
      decision,
      operator_id: operatorId,
    };
  }
}
