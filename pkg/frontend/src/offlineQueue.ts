// Offline submission queue. Entries get a client-generated idempotency key
// at enqueue time, so flushing after a crash or a double reconnect can never
// duplicate a record: the server replays the original submission for a key
// it has already seen. Entries the server permanently rejects (validation)
// stay visible for manual fixing instead of being dropped.

import { Answers, NewOption, NetworkError, RecordDoc, RequestError } from "./api.js";

export interface QueuedSubmission {
  key: string;
  answers: Answers;
  newOptions: NewOption[];
  queuedAt: string;
  rejected?: { code: string; message: string; field?: string };
}

export interface FlushResult {
  delivered: number;
  rejected: number;
  remaining: number;
}

function freshKey(): string {
  const c = globalThis.crypto as Crypto | undefined;
  if (c && typeof c.randomUUID === "function") return c.randomUUID();
  return `q-${Date.now()}-${Math.random().toString(36).slice(2)}`;
}

export class OfflineQueue {
  constructor(
    private storageKey: string,
    private storage: Storage = globalThis.localStorage,
  ) {}

  list(): QueuedSubmission[] {
    const raw = this.storage.getItem(this.storageKey);
    if (!raw) return [];
    try {
      return JSON.parse(raw) as QueuedSubmission[];
    } catch {
      return [];
    }
  }

  private save(items: QueuedSubmission[]): void {
    if (items.length === 0) this.storage.removeItem(this.storageKey);
    else this.storage.setItem(this.storageKey, JSON.stringify(items));
  }

  pendingCount(): number {
    return this.list().filter((item) => !item.rejected).length;
  }

  rejectedItems(): QueuedSubmission[] {
    return this.list().filter((item) => item.rejected);
  }

  /** The key may be supplied by the caller when a direct submission already
   * went out with it and failed mid-flight: replaying the same key is what
   * makes the retry safe. */
  enqueue(answers: Answers, newOptions: NewOption[], key?: string): QueuedSubmission {
    const item: QueuedSubmission = {
      key: key ?? freshKey(),
      answers,
      newOptions,
      queuedAt: new Date().toISOString(),
    };
    this.save([...this.list(), item]);
    return item;
  }

  discard(key: string): void {
    this.save(this.list().filter((item) => item.key !== key));
  }

  /** Deliver pending entries in order. Stops at the first network failure
   * (still offline); validation rejections are marked and kept. */
  async flush(submit: (item: QueuedSubmission) => Promise<RecordDoc>): Promise<FlushResult> {
    let delivered = 0;
    let items = this.list();
    for (const item of [...items]) {
      if (item.rejected) continue;
      try {
        await submit(item);
        items = items.filter((other) => other.key !== item.key);
        this.save(items);
        delivered += 1;
      } catch (err) {
        if (err instanceof NetworkError) break;
        if (err instanceof RequestError) {
          item.rejected = { code: err.code, message: err.message, field: err.field };
          items = items.map((other) => (other.key === item.key ? item : other));
          this.save(items);
          continue;
        }
        throw err;
      }
    }
    const after = this.list();
    return {
      delivered,
      rejected: after.filter((item) => item.rejected).length,
      remaining: after.filter((item) => !item.rejected).length,
    };
  }
}
