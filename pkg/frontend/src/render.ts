/**
 * Pure HTML rendering of the console state.  Every evidence value is
 * displayed verbatim from the received message (strings raw, everything
 * else via JSON), which the snapshot tests verify byte for byte.
 */

import { Evidence } from "./protocol.js";
import { ConsoleStore, Notice, PendingRequest } from "./store.js";

const MISUSE_VERDICTS = new Set([
  "Revoked",
  "BadSignature",
  "Expired",
  "NotYetValid",
  "BrokenChain",
]);

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Display form of one evidence value, byte-identical for strings. */
export function formatValue(value: unknown): string {
  return typeof value === "string" ? value : JSON.stringify(value);
}

export function isMisuse(evidence: Evidence): boolean {
  const verdict = evidence["beacon_verdict"];
  if (typeof verdict === "string" && MISUSE_VERDICTS.has(verdict)) return true;
  const events = evidence["misuse_events"];
  return Array.isArray(events) && events.length > 0;
}

export function renderEvidence(evidence: Evidence): string {
  const rows = Object.keys(evidence)
    .sort()
    .map(
      (key) =>
        `<dt>${escapeHtml(key)}</dt><dd data-field="${escapeHtml(key)}">` +
        `${escapeHtml(formatValue(evidence[key]))}</dd>`,
    );
  return `<dl class="evidence">${rows.join("")}</dl>`;
}

export function renderCard(
  req: PendingRequest,
  remainingS: number,
  decided: boolean,
): string {
  const badge = isMisuse(req.evidence)
    ? '<span class="badge misuse">MISUSE</span>'
    : "";
  const buttons = decided
    ? '<span class="decided">decision sent</span>'
    : `<button data-eid="${escapeHtml(req.engagementId)}" data-decision="abort">Abort</button>` +
      `<button data-eid="${escapeHtml(req.engagementId)}" data-decision="proceed">Proceed</button>`;
  return [
    `<article class="card" data-engagement="${escapeHtml(req.engagementId)}">`,
    `<header><h2>${escapeHtml(req.engagementId)}</h2>${badge}`,
    `<span class="countdown" data-deadline="${req.deadline}">` +
      `${remainingS.toFixed(1)}s</span></header>`,
    `<p class="meta">requested at t=${req.simTime} (timeout ${req.timeoutS}s)</p>`,
    renderEvidence(req.evidence),
    `<footer>${buttons}</footer>`,
    "</article>",
  ].join("");
}

export function renderNotices(notices: Notice[]): string {
  if (notices.length === 0) return "";
  const items = notices
    .slice(-5)
    .map((n) => `<li class="${n.kind}">${escapeHtml(n.text)}</li>`)
    .join("");
  return `<ul class="notices">${items}</ul>`;
}

export function renderQueue(store: ConsoleStore): string {
  const status = store.connected
    ? '<span class="dot live"></span>connected'
    : '<span class="dot dead"></span>reconnecting…';
  const clock = `sim t=${store.latestSimTime.toFixed(1)}s`;
  const queue = store.queue();
  const body =
    queue.length === 0
      ? '<p class="empty">no pending engagements</p>'
      : queue
          .map((req) =>
            renderCard(req, store.remainingSeconds(req), store.hasDecided(req.engagementId)),
          )
          .join("");
  return [
    `<header class="topbar"><h1>Protective Emblem Console</h1>`,
    `<span class="status">${status}</span><span class="clock">${clock}</span></header>`,
    renderNotices(store.notices),
    `<main class="queue">${body}</main>`,
  ].join("");
}
