import { AnnotationApi, ApiError, ComparisonTask } from "./api.js";

export type Side = "left" | "right";
export type Selection = Side | "none";

export type SessionView =
  | { kind: "loading" }
  | { kind: "comparison"; task: ComparisonTask; selection: Selection; submitted: boolean }
  | { kind: "retry"; task: ComparisonTask; side: Side; attempts: number }
  | { kind: "done"; pairs: number; tasksAnswered: number; tasksTotal: number }
  | { kind: "error"; message: string };

const MAX_STALE_SKIPS = 5;

/**
 * Drives one annotator through the comparison queue: fetch a pending pair,
 * take a selection, submit it, advance. A submit that fails on the network
 * is parked in a retry slot and replayed by flushRetries(); the task id acts
 * as the idempotency key, and the server answers a replay of an
 * already-stored pair with a conflict, which the session counts as success.
 * Either way a pair is stored at most once no matter how often submit fires.
 */
export class AnnotationSession {
  view: SessionView = { kind: "loading" };

  private readonly answered = new Set<string>();
  private inflight = false;
  private listeners: Array<(view: SessionView) => void> = [];

  constructor(
    private readonly api: AnnotationApi,
    readonly annotator: string = "ui",
  ) {}

  onChange(listener: (view: SessionView) => void): void {
    this.listeners.push(listener);
  }

  private setView(view: SessionView): void {
    this.view = view;
    for (const listener of this.listeners) listener(view);
  }

  canSubmit(): boolean {
    return this.view.kind === "comparison"
      && this.view.selection !== "none"
      && !this.view.submitted
      && !this.inflight;
  }

  select(side: Side): void {
    if (this.view.kind !== "comparison" || this.view.submitted) return;
    this.setView({ ...this.view, selection: side });
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    this.setView({ kind: "loading" });
    try {
      for (let skips = 0; skips <= MAX_STALE_SKIPS; skips++) {
        const task = await this.api.nextTask();
        if (task === null) {
          const status = await this.api.status();
          this.setView({
            kind: "done",
            pairs: status.pairs,
            tasksAnswered: status.tasks_answered,
            tasksTotal: status.tasks_total,
          });
          return;
        }
        if (!this.answered.has(task.task_id)) {
          this.setView({ kind: "comparison", task, selection: "none", submitted: false });
          return;
        }
        // stale snapshot: the queue re-offered a pair this session already
        // stored, so ask again instead of rendering it
      }
      this.setView({ kind: "error", message: "task queue keeps returning answered tasks" });
    } catch (e) {
      this.setView({ kind: "error", message: describe(e) });
    }
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || this.view.kind !== "comparison") return;
    const task = this.view.task;
    const side = this.view.selection as Side;
    this.inflight = true;
    try {
      await this.api.submitChoice(task.task_id, side, this.annotator);
      this.answered.add(task.task_id);
      this.setView({ kind: "comparison", task, selection: side, submitted: true });
    } catch (e) {
      if (e instanceof ApiError && e.status === 409) {
        // another annotator (or an earlier replay) stored this pair first
        this.answered.add(task.task_id);
      } else if (e instanceof ApiError) {
        this.setView({ kind: "error", message: e.message });
        return;
      } else {
        this.setView({ kind: "retry", task, side, attempts: 1 });
        return;
      }
    } finally {
      this.inflight = false;
    }
    await this.loadNext();
  }

  pendingRetry(): boolean {
    return this.view.kind === "retry";
  }

  async flushRetries(): Promise<void> {
    if (this.view.kind !== "retry" || this.inflight) return;
    const { task, side, attempts } = this.view;
    this.inflight = true;
    try {
      if (!this.answered.has(task.task_id)) {
        await this.api.submitChoice(task.task_id, side, this.annotator);
      }
      this.answered.add(task.task_id);
    } catch (e) {
      if (e instanceof ApiError && e.status === 409) {
        this.answered.add(task.task_id);
      } else if (e instanceof ApiError) {
        this.setView({ kind: "error", message: e.message });
        return;
      } else {
        this.setView({ kind: "retry", task, side, attempts: attempts + 1 });
        return;
      }
    } finally {
      this.inflight = false;
    }
    await this.loadNext();
  }
}

function describe(e: unknown): string {
  return e instanceof Error ? e.message : String(e);
}
