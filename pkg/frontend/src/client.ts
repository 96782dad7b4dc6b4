/**
 * Thin HTTP client for the gateway. All server interaction goes through
 * this module; nothing else in the UI touches the network.
 *
 * Error split matters to the view layer: a GatewayHttpError means the
 * server answered and rejected the request (the message should not be
 * retried verbatim), while any other rejection is a transport failure
 * (the message is kept and offered for retry).
 */

import type {
  ChatRequestBody,
  ChatResponseBody,
  HealthBody,
  MetricsBody,
  TranscriptBody,
} from "./types.js";

export class GatewayHttpError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`gateway returned ${status}: ${detail}`);
    this.name = "GatewayHttpError";
    this.status = status;
    this.detail = detail;
  }
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

// Wrapped so the global fetch keeps its expected receiver in browsers.
const defaultFetch: FetchLike = (url, init) => fetch(url, init);

export class GatewayClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl: FetchLike = defaultFetch) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) {
      let detail = resp.statusText || `status ${resp.status}`;
      try {
        const body: unknown = await resp.json();
        if (body && typeof body === "object" && "detail" in body) {
          detail = String((body as { detail: unknown }).detail);
        } else {
          detail = JSON.stringify(body);
        }
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new GatewayHttpError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  chat(body: ChatRequestBody): Promise<ChatResponseBody> {
    return this.request<ChatResponseBody>("/v1/chat", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  session(sessionId: string): Promise<TranscriptBody> {
    return this.request<TranscriptBody>(
      `/v1/session/${encodeURIComponent(sessionId)}`,
    );
  }

  health(): Promise<HealthBody> {
    return this.request<HealthBody>("/v1/health");
  }

  metrics(): Promise<MetricsBody> {
    return this.request<MetricsBody>("/v1/metrics");
  }
}
