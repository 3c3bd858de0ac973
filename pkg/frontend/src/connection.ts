/**
 * Reconnecting WebSocket wrapper.  On every (re)connect the server sends a
 * state snapshot, so the store is reset at session start and re-synced
 * from the incoming messages.  The socket factory and timer are
 * injectable so tests can drive the lifecycle deterministically.
 */

import { OperatorDecisionMessage, parseServerMessage, ServerMessage } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;
export type Scheduler = (fn: () => void, delayMs: number) => void;

export interface ConnectionOptions {
  onMessage: (msg: ServerMessage) => void;
  onSessionStart?: () => void;
  onSessionEnd?: () => void;
  onBadFrame?: (reason: string) => void;
  factory?: SocketFactory;
  scheduler?: Scheduler;
  backoffMs?: number[];
}

const DEFAULT_BACKOFF_MS = [500, 1000, 2000, 4000, 8000, 10000];

export class ConsoleConnection {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private readonly backoff: number[];
  private readonly factory: SocketFactory;
  private readonly scheduler: Scheduler;

  constructor(
    private readonly url: string,
    private readonly opts: ConnectionOptions,
  ) {
    this.backoff = opts.backoffMs ?? DEFAULT_BACKOFF_MS;
    this.factory =
      opts.factory ??
      ((u: string) => new WebSocket(u) as unknown as SocketLike);
    this.scheduler = opts.scheduler ?? ((fn, ms) => setTimeout(fn, ms));
  }

  connect(): void {
    if (this.closed) return;
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      this.opts.onSessionStart?.();
    };
    socket.onmessage = (event) => {
      try {
        this.opts.onMessage(parseServerMessage(String(event.data)));
      } catch (err) {
        this.opts.onBadFrame?.(err instanceof Error ? err.message : String(err));
      }
    };
    socket.onclose = () => {
      this.socket = null;
      this.opts.onSessionEnd?.();
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      // onclose follows; nothing else to do
    };
  }

  private scheduleReconnect(): void {
    if (this.closed) return;
    const delay = this.backoff[Math.min(this.attempts, this.backoff.length - 1)];
    this.attempts += 1;
    this.scheduler(() => this.connect(), delay);
  }

  send(message: OperatorDecisionMessage): boolean {
    if (!this.socket) return false;
    this.socket.send(JSON.stringify(message));
    return true;
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }
}
