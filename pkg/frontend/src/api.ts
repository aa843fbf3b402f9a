// Typed client for the inspection service JSON API. The server is the only
// source of truth; this module does transport and shape, nothing else.

export interface TaskRow {
  task_id: string;
  sample_id: string;
  language_pair: string;
  assignee: string;
  state: 'pending' | 'done';
}

export interface QaPair {
  question: string;
  answer: string;
}

export interface TurnView {
  index: number;
  pairs: Record<string, QaPair>;
}

export interface SampleView {
  sample_id: string;
  image_id: string;
  kind: string;
  languages: string[];
  turns: TurnView[];
}

export interface AnnotatorRow {
  assigned: number;
  passed: number;
  errored: number;
  pending: number;
}

export interface BoardData {
  review: {
    per_annotator: Record<string, AnnotatorRow>;
    totals: AnnotatorRow;
  };
  preference: {
    ballot_counts: Record<string, number>;
    aggregated: Record<string, string>;
  };
}

export interface PreferenceItemView {
  item_id: string;
  image: string;
  question: string;
  answer_a: string;
  answer_b: string;
  word_limit?: number;
}

export interface VerdictSubmission {
  task_id: string;
  outcome: 'pass' | 'error';
  reason?: string;
  note?: string;
}

export interface BallotAck {
  recorded: boolean;
  ballots: number;
  aggregated: string | null;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** The surface the view controllers depend on; ApiClient is the real one. */
export interface InspectApi {
  tasks(assignee?: string, state?: string): Promise<TaskRow[]>;
  sample(sampleId: string): Promise<SampleView>;
  submitVerdict(verdict: VerdictSubmission): Promise<TaskRow>;
  board(): Promise<BoardData>;
  preferenceItems(): Promise<PreferenceItemView[]>;
  castBallot(itemId: string, annotator: string, choice: string): Promise<BallotAck>;
}

export class ApiClient implements InspectApi {
  constructor(
    private readonly baseUrl: string = '',
    private readonly token: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    if (body !== undefined) headers['Content-Type'] = 'application/json';
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    if (!response.ok) {
      let message = `${response.status} on ${path}`;
      try {
        const parsed = JSON.parse(text);
        if (parsed.error) message = String(parsed.error);
        else if (parsed.detail) message = String(parsed.detail);
      } catch {
        // non-JSON error body, keep the status line
      }
      throw new ApiError(response.status, message);
    }
    return JSON.parse(text) as T;
  }

  async tasks(assignee?: string, state?: string): Promise<TaskRow[]> {
    const query = new URLSearchParams();
    if (assignee) query.set('assignee', assignee);
    if (state) query.set('state', state);
    const qs = query.toString();
    const suffix = qs ? `?${qs}` : '';
    const data = await this.request<{ tasks: TaskRow[] }>('GET', `/tasks${suffix}`);
    return data.tasks;
  }

  sample(sampleId: string): Promise<SampleView> {
    return this.request<SampleView>('GET', `/samples/${encodeURIComponent(sampleId)}`);
  }

  async submitVerdict(verdict: VerdictSubmission): Promise<TaskRow> {
    const data = await this.request<{ task: TaskRow }>('POST', '/verdicts', verdict);
    return data.task;
  }

  board(): Promise<BoardData> {
    return this.request<BoardData>('GET', '/board');
  }

  async preferenceItems(): Promise<PreferenceItemView[]> {
    const data = await this.request<{ items: PreferenceItemView[] }>(
      'GET',
      '/preference/items',
    );
    return data.items;
  }

  castBallot(itemId: string, annotator: string, choice: string): Promise<BallotAck> {
    return this.request<BallotAck>('POST', '/preference/ballots', {
      item_id: itemId,
      annotator,
      choice,
    });
  }
}
