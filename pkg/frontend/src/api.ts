/** Typed client for the study service HTTP API.
 *
 * The shapes here mirror the service's rater-facing payloads exactly;
 * they are a stable contract.  `fetch` is injected so tests can stub
 * the network without a server.
 */

export interface VariantRef {
  label: "A" | "B";
  url: string;
}

export interface QuestionPayload {
  question: string;
  image: string;
  original_url: string;
  variants: VariantRef[];
  lease_expires_at: number;
}

export interface AnswerAck {
  question: string;
  rater: string;
  blocked: boolean;
  answers: number;
}

export interface RaterInfo {
  rater: string;
  blocked: boolean;
  answers: number;
}

export interface AnswerBody {
  question: string;
  rater: string;
  choice: "A" | "B";
  toggles: number;
  token: string;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

/** Raised for any non-2xx response; carries the status for dispatch. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorMessage(
  response: Awaited<ReturnType<FetchLike>>,
): Promise<string> {
  try {
    const body = (await response.json()) as { error?: string };
    if (body && typeof body.error === "string") return body.error;
  } catch {
    // fall through to the generic message
  }
  return `service returned status ${response.status}`;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike,
  ) {}

  private async request<T>(
    path: string,
    init?: Parameters<FetchLike>[1],
  ): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (response.status < 200 || response.status >= 300) {
      throw new ApiError(response.status, await errorMessage(response));
    }
    return (await response.json()) as T;
  }

  register(rater: string): Promise<RaterInfo> {
    return this.request<RaterInfo>("/raters", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ rater }),
    });
  }

  nextQuestion(rater: string): Promise<QuestionPayload> {
    return this.request<QuestionPayload>(
      `/questions/next?rater=${encodeURIComponent(rater)}`,
    );
  }

  submitAnswer(body: AnswerBody): Promise<AnswerAck> {
    return this.request<AnswerAck>("/answers", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}

/** Idempotency token for one answer submission; retries reuse it. */
export function makeToken(): string {
  const cryptoApi = (globalThis as { crypto?: { randomUUID?: () => string } })
    .crypto;
  if (cryptoApi?.randomUUID) return cryptoApi.randomUUID();
  return `tok-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}
