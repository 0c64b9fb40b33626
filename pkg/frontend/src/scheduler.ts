// Debounced prediction requests with stale-response discarding.
//
// Rapid plan edits must collapse into one in-flight request, and a late
// response from an older request must never overwrite a newer one.  The
// clock and transport are injected so the timing behavior is testable
// without a browser.

export type SendFn<Req, Res> = (req: Req) => Promise<Res>;

export interface SchedulerOptions {
  debounceMs?: number;
  setTimer?: (fn: () => void, ms: number) => number;
  clearTimer?: (id: number) => void;
}

export class PredictScheduler<Req, Res> {
  private send: SendFn<Req, Res>;
  private onResult: (res: Res, req: Req) => void;
  private onError: (err: unknown) => void;
  private debounceMs: number;
  private setTimer: (fn: () => void, ms: number) => number;
  private clearTimer: (id: number) => void;

  private pendingTimer: number | null = null;
  private pendingReq: Req | null = null;
  private requestSeq = 0;   // id of the newest request handed to the transport
  private appliedSeq = 0;   // id of the newest response actually applied
  private inFlightCount = 0;

  constructor(send: SendFn<Req, Res>, onResult: (res: Res, req: Req) => void,
              onError: (err: unknown) => void = () => undefined,
              opts: SchedulerOptions = {}) {
    this.send = send;
    this.onResult = onResult;
    this.onError = onError;
    this.debounceMs = opts.debounceMs ?? 150;
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms) as unknown as number);
    this.clearTimer = opts.clearTimer ?? ((id) => clearTimeout(id as unknown as Parameters<typeof clearTimeout>[0]));
  }

  get inFlight(): number {
    return this.inFlightCount;
  }

  /** Queue a request; earlier queued-but-unsent requests are replaced. */
  request(req: Req): void {
    this.pendingReq = req;
    if (this.pendingTimer !== null) {
      this.clearTimer(this.pendingTimer);
    }
    this.pendingTimer = this.setTimer(() => this.fire(), this.debounceMs);
  }

  private fire(): void {
    this.pendingTimer = null;
    if (this.pendingReq === null) return;
    const req = this.pendingReq;
    this.pendingReq = null;
    const seq = ++this.requestSeq;
    this.inFlightCount += 1;
    this.send(req).then(
      (res) => {
        this.inFlightCount -= 1;
        // last response wins: drop anything older than what we've applied
        if (seq > this.appliedSeq) {
          this.appliedSeq = seq;
          this.onResult(res, req);
        }
      },
      (err) => {
        this.inFlightCount -= 1;
        this.onError(err);
      },
    );
  }
}
