/** Throttled decode requests with stale-response discarding.
 *
 * Live scrubbing issues at most `maxPerSecond` requests; each request carries
 * a sequence number and a response is delivered only if no newer response has
 * already been delivered, so out-of-order completions never render.
 */

import type { DecodeResponse } from "./api.js";
import type { Z } from "./coords.js";

export interface DecodeTransport {
  decode(z: Z): Promise<DecodeResponse>;
}

export interface DecodeSchedulerOptions {
  maxPerSecond?: number;
  now?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
}

export class DecodeScheduler {
  private readonly minIntervalMs: number;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private nextSeq = 0;
  private deliveredSeq = -1;
  private lastSentAt = -Infinity;
  private pendingZ: Z | null = null;
  private timerArmed = false;

  /** Count of requests actually sent (for tests and diagnostics). */
  sent = 0;
  /** Count of responses discarded as stale. */
  discarded = 0;

  constructor(
    private readonly api: DecodeTransport,
    private readonly onLayout: (response: DecodeResponse, seq: number) => void,
    options: DecodeSchedulerOptions = {},
  ) {
    this.minIntervalMs = 1000 / (options.maxPerSecond ?? 30);
    this.now = options.now ?? (() => Date.now());
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
  }

  /** Request a decode of `z`; coalesces bursts beyond the rate limit. */
  request(z: Z): void {
    const elapsed = this.now() - this.lastSentAt;
    if (elapsed >= this.minIntervalMs) {
      this.send(z);
      return;
    }
    this.pendingZ = z;
    if (!this.timerArmed) {
      this.timerArmed = true;
      this.setTimer(() => this.flush(), this.minIntervalMs - elapsed);
    }
  }

  private flush(): void {
    this.timerArmed = false;
    if (this.pendingZ !== null) {
      const z = this.pendingZ;
      this.pendingZ = null;
      this.send(z);
    }
  }

  private send(z: Z): void {
    const seq = this.nextSeq++;
    this.lastSentAt = this.now();
    this.sent += 1;
    void this.api
      .decode(z)
      .then((response) => {
        if (seq > this.deliveredSeq) {
          this.deliveredSeq = seq;
          this.onLayout(response, seq);
        } else {
          this.discarded += 1;
        }
      })
      .catch(() => {
        // a failed decode never clobbers the last good layout
      });
  }
}
