/** Session state reconciliation and the single-in-flight mutation queue. */

import type { Label, SessionState, Voxel } from "./types.js";

export interface PendingStroke {
  label: Label;
  voxels: Voxel[];
}

export type StrokeSender = (stroke: PendingStroke) => Promise<SessionState | null>;

/**
 * Holds the last acknowledged server state and enforces revision
 * monotonicity: a response whose revision is not strictly newer than the
 * displayed one is discarded, so out-of-order arrivals can never roll the
 * view backwards.
 */
interface QueueEntry {
  stroke: PendingStroke;
  send: StrokeSender;
  settle: () => void;
}

export class SessionStore {
  state: SessionState | null = null;
  /** Stroke previews not yet confirmed by the server. */
  pending: PendingStroke[] = [];
  private inflight = false;
  private queue: QueueEntry[] = [];
  private listeners: Array<() => void> = [];

  get revision(): number {
    return this.state ? this.state.revision : 0;
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  /** Accept a server state if it advances the revision; report whether it did. */
  applyServerState(next: SessionState): boolean {
    if (this.state && next.revision <= this.state.revision) {
      return false; // stale response, keep what we show
    }
    this.state = next;
    this.notify();
    return true;
  }

  reset(initial: SessionState): void {
    this.state = initial;
    this.pending = [];
    this.queue = [];
    this.inflight = false;
    this.notify();
  }

  /**
   * Queue a stroke for sending; the returned promise settles when this
   * stroke is confirmed or rolled back.  Only one mutation is in flight at
   * a time; further strokes wait locally.  The stroke echoes immediately
   * as a pending preview and is removed when the server confirms
   * (authoritative replacement) or the request fails (rollback).
   */
  submitStroke(stroke: PendingStroke, send: StrokeSender): Promise<void> {
    this.pending.push(stroke);
    let settle: () => void = () => {};
    const done = new Promise<void>((resolve) => {
      settle = resolve;
    });
    this.queue.push({ stroke, send, settle });
    this.notify();
    void this.drain();
    return done;
  }

  private async drain(): Promise<void> {
    if (this.inflight) return;
    this.inflight = true;
    try {
      while (this.queue.length > 0) {
        const entry = this.queue[0];
        let confirmed: SessionState | null = null;
        try {
          confirmed = await entry.send(entry.stroke);
        } catch {
          confirmed = null;
        }
        this.queue.shift();
        const at = this.pending.indexOf(entry.stroke);
        if (at >= 0) this.pending.splice(at, 1); // rollback or replace
        if (confirmed) this.applyServerState(confirmed);
        this.notify();
        entry.settle();
      }
    } finally {
      this.inflight = false;
    }
  }

  get hasInflight(): boolean {
    return this.inflight;
  }
}
