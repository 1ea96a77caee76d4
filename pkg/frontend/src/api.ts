export interface TimelineEntryPayload {
  date: string;
  summary: string;
}

export interface TimelinePayload {
  id: string;
  entries: TimelineEntryPayload[];
}

export interface ComparisonTask {
  task_id: string;
  topic: string;
  left: TimelinePayload;
  right: TimelinePayload;
  status: string;
}

export interface ServiceStatus {
  run_id: string;
  stage: string;
  topic: string;
  candidates: number;
  tasks_total: number;
  tasks_answered: number;
  pairs: number;
  keywords: number;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the annotation service endpoints. */
export class AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<any> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    let body: any = null;
    try {
      body = await response.json();
    } catch {
      // non-JSON body, fall through to the status check
    }
    if (!response.ok) {
      const message = body && body.error ? String(body.error) : `HTTP ${response.status}`;
      throw new ApiError(response.status, message);
    }
    return body;
  }

  async nextTask(): Promise<ComparisonTask | null> {
    const body = await this.request("/tasks/next");
    return body.task ?? null;
  }

  async submitChoice(taskId: string, winner: "left" | "right", annotator: string) {
    return await this.request(`/tasks/${encodeURIComponent(taskId)}/choice`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ winner, annotator }),
    }) as { recorded: boolean; winner: string; loser: string };
  }

  async submitKeywords(topic: string, keywords: string[]): Promise<number> {
    const body = await this.request("/keywords", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ topic, keywords }),
    });
    return body.count as number;
  }

  async status(): Promise<ServiceStatus> {
    return await this.request("/status") as ServiceStatus;
  }
}
