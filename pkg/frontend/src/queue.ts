// Offline commit queue with exactly-once semantics per card id.
//
// Verdicts that could not reach the service are parked here (persisted so
// a reload survives) and flushed on the next successful connection. The
// service rejects duplicate card ids, so a commit whose acknowledgment
// was lost resolves to a "duplicate" rejection on retry; the queue treats
// that as success, which is what makes the flush exactly-once.

import { ApiError } from "./api.js";
import type { CommitAck, VerdictSubmission } from "./api.js";

export interface QueueStorage {
  load(): VerdictSubmission[];
  save(items: VerdictSubmission[]): void;
}

export class MemoryStorage implements QueueStorage {
  private items: VerdictSubmission[] = [];

  load(): VerdictSubmission[] {
    return [...this.items];
  }

  save(items: VerdictSubmission[]): void {
    this.items = [...items];
  }
}

export class BrowserStorage implements QueueStorage {
  constructor(private readonly key: string) {}

  load(): VerdictSubmission[] {
    const raw = window.localStorage.getItem(this.key);
    if (!raw) return [];
    try {
      return JSON.parse(raw) as VerdictSubmission[];
    } catch {
      return [];
    }
  }

  save(items: VerdictSubmission[]): void {
    window.localStorage.setItem(this.key, JSON.stringify(items));
  }
}

export interface FlushResult {
  committed: string[];
  deduplicated: string[];
  dropped: { card_id: string; reason: string }[];
  offline: boolean;
}

export class OfflineCommitQueue {
  private items: VerdictSubmission[];

  constructor(private readonly storage: QueueStorage = new MemoryStorage()) {
    this.items = storage.load();
  }

  get pending(): VerdictSubmission[] {
    return [...this.items];
  }

  get size(): number {
    return this.items.length;
  }

  enqueue(verdicts: VerdictSubmission[]): void {
    const known = new Set(this.items.map((v) => v.card_id));
    for (const v of verdicts) {
      if (!known.has(v.card_id)) {
        this.items.push(v);
        known.add(v.card_id);
      }
    }
    this.storage.save(this.items);
  }

  /**
   * Try to commit everything queued, in one batch. Network failures keep
   * the queue intact; committed and duplicate-rejected entries leave it;
   * entries the service rejects for any other reason are dropped and
   * reported (retrying them would fail forever). A 400 for the whole
   * batch means the entries reference cards the service no longer knows
   * (a timed-out round): they are stale and dropped wholesale.
   */
  async flush(commit: (batch: VerdictSubmission[]) => Promise<CommitAck>): Promise<FlushResult> {
    const result: FlushResult = { committed: [], deduplicated: [], dropped: [], offline: false };
    if (this.items.length === 0) return result;
    let ack: CommitAck;
    try {
      ack = await commit(this.pending);
    } catch (err) {
      if (err instanceof ApiError && err.status === 400) {
        result.dropped = this.items.map((v) => ({ card_id: v.card_id, reason: err.detail }));
        this.items = [];
        this.storage.save(this.items);
        return result;
      }
      result.offline = true;
      return result;
    }
    const resolved = new Set<string>();
    for (const entry of ack.committed) {
      resolved.add(entry.card_id);
      result.committed.push(entry.card_id);
    }
    for (const entry of ack.rejected) {
      resolved.add(entry.card_id);
      if (entry.reason === "duplicate") {
        result.deduplicated.push(entry.card_id);
      } else {
        result.dropped.push(entry);
      }
    }
    this.items = this.items.filter((v) => !resolved.has(v.card_id));
    this.storage.save(this.items);
    return result;
  }
}
