import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { parseServerMessage, ServerMessage } from "../src/protocol.js";

/** The recorded live-server session, in arrival order. */
export function loadSession(): ServerMessage[] {
  const path = fileURLToPath(new URL("./fixtures/session.jsonl", import.meta.url));
  return readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => parseServerMessage(line));
}

export function rawSessionLines(): string[] {
  const path = fileURLToPath(new URL("./fixtures/session.jsonl", import.meta.url));
  return readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0);
}
