/** HTTP client for the monitor API.
 *
 * All policy logic stays on the server: this client transports requests and
 * returns payloads untouched.  Invocations are retried once on network
 * failure, then surfaced; a 401 raises SessionExpiredError so the app can
 * show its banner.
 */

import { API_BASE_URL } from "./config";
import type {
  AuditPayload,
  DocumentSummary,
  FunctionListPayload,
  InvokeRequest,
  InvokeResponse,
  SessionInfo,
  ViewPayload,
} from "./types";

export const SESSION_HEADER = "X-FBAC-Session";

export class ApiError extends Error {
  constructor(message: string, public status: number) {
    super(message);
  }
}

export class SessionExpiredError extends ApiError {
  constructor() {
    super("session-expired", 401);
  }
}

export class ApiClient {
  private session: string | null = null;

  constructor(private baseUrl: string = API_BASE_URL) {}

  get sessionId(): string | null {
    return this.session;
  }

  async createSession(token: string): Promise<SessionInfo> {
    const response = await fetch(`${this.baseUrl}/session`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ token }),
    });
    if (!response.ok) {
      throw new ApiError("token was not accepted", response.status);
    }
    const info = (await response.json()) as SessionInfo;
    this.session = info.session;
    return info;
  }

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const base: Record<string, string> = { ...extra };
    if (this.session) {
      base[SESSION_HEADER] = this.session;
    }
    return base;
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      ...init,
      headers: this.headers((init.headers as Record<string, string>) ?? {}),
    });
    if (response.status === 401) {
      throw new SessionExpiredError();
    }
    if (!response.ok) {
      throw new ApiError(`request failed: ${path}`, response.status);
    }
    return (await response.json()) as T;
  }

  getDocuments(): Promise<{ documents: DocumentSummary[] }> {
    return this.request("/documents");
  }

  getView(docId: string): Promise<ViewPayload> {
    return this.request(`/documents/${encodeURIComponent(docId)}/view`);
  }

  getAtomFunctions(docId: string, atomId: string): Promise<FunctionListPayload> {
    return this.request(
      `/documents/${encodeURIComponent(docId)}/atoms/${encodeURIComponent(atomId)}/functions`,
    );
  }

  async invoke(body: InvokeRequest): Promise<InvokeResponse> {
    const init: RequestInit = {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    };
    try {
      return await this.request<InvokeResponse>("/invoke", init);
    } catch (error) {
      if (error instanceof ApiError) {
        throw error; // the server answered; do not replay a decided call
      }
      return this.request<InvokeResponse>("/invoke", init); // one retry
    }
  }

  getAudit(params: Record<string, string> = {}): Promise<AuditPayload> {
    const query = new URLSearchParams(params).toString();
    return this.request(`/audit${query ? `?${query}` : ""}`);
  }
}
