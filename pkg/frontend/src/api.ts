/**
 * Typed client for the grading service HTTP API.
 *
 * Paths are relative by default so the bundle works when served by the
 * grading process itself; pass a base URL to point elsewhere.
 */

export interface ProblemSummary {
  problem_id: string;
  statement_markdown: string;
}

export interface SessionInfo {
  student_id: string;
  group: string;
  created: number;
}

export interface RevealedPoint {
  rubric_id: string;
  failure_sentence: string;
}

export interface FeedbackPayload {
  strategy: string;
  checklist?: string[];
  general_message?: string;
  revealed?: RevealedPoint[];
}

export interface AttemptResponse {
  attempt_index: number;
  problem_id: string;
  feedback: FeedbackPayload;
  rubric?: number[];
  score_percent?: number;
  empty_body?: boolean;
}

export interface HistoryItem {
  problem_id: string;
  attempt_index: number;
  ts: number;
  body_hash: string;
  score_percent?: number | null;
  rubric?: number[] | null;
  revealed_rubric?: string | null;
}

export interface HistoryResponse {
  student_id: string;
  group: string;
  attempts: HistoryItem[];
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
    public readonly retryAfter?: number,
  ) {
    super(message);
    this.name = 'ApiError';
  }

  /** True for outages worth retrying: 503 or the network being unreachable. */
  get transient(): boolean {
    return this.status === 503 || this.status === 0;
  }
}

async function errorFromResponse(res: Response): Promise<ApiError> {
  let detail = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (typeof body?.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status line
  }
  const retryAfter = Number(res.headers.get('Retry-After') ?? NaN);
  return new ApiError(res.status, detail, Number.isFinite(retryAfter) ? retryAfter : undefined);
}

export class GradingApi {
  constructor(private readonly baseUrl: string = '') {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let res: Response;
    try {
      res = await fetch(this.baseUrl + path, {
        method,
        headers: body !== undefined ? { 'Content-Type': 'application/json' } : undefined,
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${err instanceof Error ? err.message : err}`);
    }
    if (!res.ok) throw await errorFromResponse(res);
    return (await res.json()) as T;
  }

  listProblems(): Promise<ProblemSummary[]> {
    return this.request('GET', '/api/problems');
  }

  createSession(studentId: string, rosterGroup?: string): Promise<SessionInfo> {
    const payload: Record<string, string> = { student_id: studentId };
    if (rosterGroup !== undefined) payload.roster_group = rosterGroup;
    return this.request('POST', '/api/sessions', payload);
  }

  submitAttempt(problemId: string, studentId: string, bodyMarkdown: string): Promise<AttemptResponse> {
    return this.request('POST', `/api/problems/${encodeURIComponent(problemId)}/attempts`, {
      student_id: studentId,
      body_markdown: bodyMarkdown,
    });
  }

  attemptHistory(studentId: string): Promise<HistoryResponse> {
    return this.request('GET', `/api/students/${encodeURIComponent(studentId)}/attempts`);
  }
}
