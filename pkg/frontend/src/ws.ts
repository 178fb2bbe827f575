// Reconnecting progress subscription. One socket per visible job; backoff
// doubles up to a cap and resets on a successful message. The server sends
// its latest event first on every connect, so no client-side catch-up
// bookkeeping is needed.

import type { ProgressEvent } from './types.js';

export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ProgressSubscriptionOptions {
  socketFactory?: SocketFactory;
  initialBackoffMs?: number;
  maxBackoffMs?: number;
  scheduler?: (fn: () => void, ms: number) => unknown;
}

export class ProgressSubscription {
  private socket: SocketLike | null = null;
  private backoffMs: number;
  private closed = false;
  readonly attempts: number[] = [];

  constructor(
    private readonly url: string,
    private readonly onEvent: (event: ProgressEvent) => void,
    private readonly options: ProgressSubscriptionOptions = {},
  ) {
    this.backoffMs = options.initialBackoffMs ?? 500;
  }

  start(): void {
    if (this.closed) return;
    const factory = this.options.socketFactory ??
      ((url: string) => new WebSocket(url) as unknown as SocketLike);
    const socket = factory(this.url);
    this.socket = socket;
    this.attempts.push(Date.now());

    socket.onmessage = (ev) => {
      this.backoffMs = this.options.initialBackoffMs ?? 500;
      let event: ProgressEvent;
      try {
        event = JSON.parse(ev.data) as ProgressEvent;
      } catch {
        return; // not ours; ignore
      }
      this.onEvent(event);
      if (event.state === 'complete' || event.state === 'failed') {
        this.stop();
      }
    };
    socket.onclose = () => {
      if (this.closed) return;
      const schedule = this.options.scheduler ?? setTimeout;
      schedule(() => this.start(), this.backoffMs);
      this.backoffMs = Math.min(
        this.backoffMs * 2,
        this.options.maxBackoffMs ?? 10_000,
      );
    };
    socket.onerror = () => {
      // onclose follows; nothing to do here
    };
  }

  stop(): void {
    this.closed = true;
    this.socket?.close();
    this.socket = null;
  }
}
